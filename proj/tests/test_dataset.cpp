#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include <unistd.h>

#include "evimg/dataset.hpp"
#include "evimg/png.hpp"
#include "evimg/render.hpp"

using namespace evimg;
namespace fs = std::filesystem;

namespace {

std::vector<LabelledId> corpus(const std::vector<std::size_t>& per_class) {
  std::vector<LabelledId> out;
  for (std::size_t c = 0; c < per_class.size(); ++c)
    for (std::size_t i = 0; i < per_class[c]; ++i)
      out.push_back({"c" + std::to_string(c) + "_" + std::to_string(i), static_cast<int>(c)});
  return out;
}

std::vector<ManifestEntry> train_of(const std::vector<std::size_t>& per_class) {
  std::vector<ManifestEntry> out;
  for (const auto& it : corpus(per_class)) out.push_back({it.event_id, it.class_id, 0, {}});
  return out;
}

std::map<int, std::size_t> counts_of(const std::vector<ManifestEntry>& v) {
  std::map<int, std::size_t> m;
  for (const auto& e : v) ++m[e.class_id];
  return m;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("evimg_test_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST(Split, HundredEventsOneClass) {
  const auto m = split(corpus({100}), {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(m.entries(Split::Train).size(), 80u);
  EXPECT_EQ(m.entries(Split::Val).size(), 10u);
  EXPECT_EQ(m.entries(Split::Test).size(), 10u);
}

TEST(Split, Deterministic) {
  const auto items = corpus({50, 70, 33});
  EXPECT_EQ(split(items, {0.8, 0.1, 0.1}, 5), split(items, {0.8, 0.1, 0.1}, 5));
  EXPECT_NE(split(items, {0.8, 0.1, 0.1}, 5), split(items, {0.8, 0.1, 0.1}, 6));
  EXPECT_EQ(manifest_to_json(split(items, {0.8, 0.1, 0.1}, 5)).dump(),
            manifest_to_json(split(items, {0.8, 0.1, 0.1}, 5)).dump());
}

TEST(Split, InvariantsOverManyShapes) {
  for (std::size_t n : {3u, 4u, 7u, 11u, 19u, 25u, 99u, 101u, 1234u}) {
    const auto items = corpus({n, n + 1, 2 * n + 3});
    const auto m = split(items, {0.8, 0.1, 0.1}, n);
    std::set<std::string> seen;
    std::size_t total = 0;
    for (auto s : kSplits)
      for (const auto& e : m.entries(s)) {
        EXPECT_TRUE(seen.insert(e.event_id).second) << "duplicate " << e.event_id;
        ++total;
      }
    EXPECT_EQ(total, items.size());
    for (const auto& [c, size] : std::map<int, std::size_t>{{0, n}, {1, n + 1}, {2, 2 * n + 3}}) {
      const std::array<double, 3> r{0.8, 0.1, 0.1};
      for (auto s : kSplits) {
        const double want = r[static_cast<int>(s)] * static_cast<double>(size);
        EXPECT_LE(std::abs(static_cast<double>(m.counts(s).at(c)) - want), 1.0)
            << "n=" << n << " class=" << c << " split=" << to_string(s);
      }
    }
  }
}

TEST(Split, SmallClassIsNamed) {
  try {
    split(corpus({10, 2}), {0.8, 0.1, 0.1}, 1, {"big", "tiny"});
    FAIL();
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("tiny"), std::string::npos);
  }
  EXPECT_THROW(split(corpus({10}), {0.8, 0.1, 0.2}, 1), ConfigError);
  auto dup = corpus({10});
  dup.push_back(dup.front());
  EXPECT_THROW(split(dup, {0.8, 0.1, 0.1}, 1), InvalidInput);
}

TEST(Split, FixedCountsPerClass) {
  // 5000 val and 5000 test per class, the rest to train.
  const auto m = split_fixed(corpus({40809, 31709, 30950}), 5000, 5000, 3,
                             {"ttbar", "DrellYan", "WJets"});
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(m.counts(Split::Val).at(c), 5000u);
    EXPECT_EQ(m.counts(Split::Test).at(c), 5000u);
  }
  EXPECT_EQ(m.counts(Split::Train).at(0), 30809u);
  EXPECT_EQ(m.counts(Split::Train).at(1), 21709u);
  EXPECT_EQ(m.counts(Split::Train).at(2), 20950u);
}

TEST(Balance, ThirtyThousandTargets) {
  const auto out = balance_by_replication(train_of({30809, 21709, 20950}),
                                          {{0, 30809}, {1, 30000}, {2, 30000}}, 17);
  const auto c = counts_of(out);
  EXPECT_EQ(c.at(0), 30809u);
  EXPECT_EQ(c.at(1), 30000u);
  EXPECT_EQ(c.at(2), 30000u);
}

TEST(Balance, ThreeToTenMultiplicities) {
  const auto out = balance_by_replication(train_of({3}), {{0, 10}}, 4);
  ASSERT_EQ(out.size(), 10u);
  std::map<std::string, int> mult;
  std::set<std::pair<std::string, int>> unique_copies;
  for (const auto& e : out) {
    ++mult[e.event_id];
    EXPECT_TRUE(unique_copies.insert({e.event_id, e.replication_index}).second);
  }
  std::vector<int> m;
  for (const auto& [id, k] : mult) m.push_back(k);
  std::sort(m.rbegin(), m.rend());
  EXPECT_EQ(m, (std::vector<int>{4, 3, 3}));
  // the first three are the originals, untouched
  for (int i = 0; i < 3; ++i) EXPECT_EQ(out[i].replication_index, 0);
}

TEST(Balance, AtOrAboveTargetUnchanged) {
  const auto in = train_of({5, 8});
  EXPECT_EQ(balance_by_replication(in, {{0, 5}, {1, 3}}, 1), in);
  EXPECT_THROW(balance_by_replication(in, {{2, 4}}, 1), InvalidInput);
}

TEST(Balance, DefaultTargetIsMax) {
  auto m = split(corpus({30, 60, 45}), {0.8, 0.1, 0.1}, 2);
  balance_manifest(m, {});
  const auto c = m.counts(Split::Train);
  EXPECT_EQ(c.at(0), 48u);
  EXPECT_EQ(c.at(1), 48u);
  EXPECT_EQ(c.at(2), 48u);
  // replicas stay inside train
  std::set<std::string> train_ids;
  for (const auto& e : m.entries(Split::Train)) train_ids.insert(e.event_id);
  for (auto s : {Split::Val, Split::Test})
    for (const auto& e : m.entries(s)) {
      EXPECT_FALSE(train_ids.count(e.event_id));
      EXPECT_EQ(e.replication_index, 0);
    }
}

TEST(Manifest, JsonRoundTrip) {
  auto m = split(corpus({20, 9}), {0.8, 0.1, 0.1}, 12, {"x", "y"});
  balance_manifest(m, {});
  EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);
  EXPECT_EQ(m.entries(Split::Train).back().image_path.rfind("train/", 0), 0u);
}

TEST(Manifest, PathsAreSanitized) {
  EXPECT_EQ(sanitize_id("run1/ev 2"), "run1_ev_2");
  EXPECT_EQ(sanitize_id(".."), "_..");
  DatasetManifest m;
  m.class_names = {"a"};
  m.entries(Split::Train) = {{"e/1", 0, 2, {}}};
  assign_image_paths(m);
  EXPECT_EQ(m.entries(Split::Train)[0].image_path, "train/a/e_1_r2.png");
}

TEST(Write, EmptyManifestMakesDirectories) {
  TempDir dir("empty");
  DatasetManifest m;
  m.class_names = {"a", "b"};
  const auto s = write_dataset(m, [](const std::string&) { return ImageTensor(4, 4); }, dir.path);
  EXPECT_TRUE(fs::exists(dir.path / "manifest.json"));
  for (const char* sp : {"train", "val", "test"})
    for (const char* c : {"a", "b"}) EXPECT_TRUE(fs::is_directory(dir.path / sp / c));
  EXPECT_EQ(s.files_written, 0u);
}

TEST(Write, OnePngPerEntryAndReplicasIdentical) {
  TempDir dir("write");
  auto m = split(corpus({10, 4}), {0.8, 0.1, 0.1}, 3, {"a", "b"});
  balance_manifest(m, {});
  auto renderer = [](const std::string& id) {
    ImageTensor img(8, 8);
    img.set(static_cast<int>(std::hash<std::string>{}(id) % 8), 0, {0, 0, 0});
    return img;
  };
  const auto s = write_dataset(m, renderer, dir.path, {false, 3});
  std::size_t entries = 0;
  std::map<std::string, std::vector<std::uint8_t>> first_bytes;
  for (auto sp : kSplits)
    for (const auto& e : m.entries(sp)) {
      ++entries;
      const auto bytes = read_file_bytes(dir.path / e.image_path);
      EXPECT_EQ(decode_png(bytes), renderer(e.event_id));
      auto [it, fresh] = first_bytes.try_emplace(e.event_id, bytes);
      if (!fresh) EXPECT_EQ(it->second, bytes) << e.image_path;
    }
  EXPECT_EQ(s.files_written, entries);
  std::size_t pngs = 0;
  for (const auto& f : fs::recursive_directory_iterator(dir.path))
    pngs += f.path().extension() == ".png";
  EXPECT_EQ(pngs, entries);
  EXPECT_GT(m.counts(Split::Train).at(1), 4u - 1); // class b was replicated
}

TEST(Write, DryRunWritesOnlyManifest) {
  TempDir dir("dry");
  const auto m = split(corpus({10}), {0.8, 0.1, 0.1}, 3);
  write_dataset(m, [](const std::string&) -> ImageTensor { throw std::runtime_error("no"); },
                dir.path, {true, 1});
  EXPECT_TRUE(fs::exists(dir.path / "manifest.json"));
  for (const auto& f : fs::recursive_directory_iterator(dir.path))
    EXPECT_NE(f.path().extension(), ".png");
}

TEST(Write, FailureLeavesNoManifest) {
  TempDir dir("fail");
  const auto m = split(corpus({10}), {0.8, 0.1, 0.1}, 3);
  EXPECT_THROW(write_dataset(m,
                             [](const std::string& id) -> ImageTensor {
                               if (id == "c0_5") throw std::runtime_error("boom");
                               return ImageTensor(2, 2);
                             },
                             dir.path),
               IoError);
  EXPECT_FALSE(fs::exists(dir.path / "manifest.json"));
}

TEST(Write, ThreadCountDoesNotChangeOutput) {
  TempDir a("t1"), b("t4");
  auto m = split(corpus({30, 12}), {0.8, 0.1, 0.1}, 8);
  balance_manifest(m, {});
  auto renderer = [](const std::string& id) {
    ImageTensor img(16, 16);
    rasterize_circle(img, {8, 8}, 1 + static_cast<int>(id.size() % 6), {0, 0, 255});
    return img;
  };
  write_dataset(m, renderer, a.path, {false, 1});
  write_dataset(m, renderer, b.path, {false, 4});
  for (const auto& f : fs::recursive_directory_iterator(a.path)) {
    if (!f.is_regular_file()) continue;
    const auto rel = fs::relative(f.path(), a.path);
    EXPECT_EQ(read_file_bytes(f.path()), read_file_bytes(b.path / rel)) << rel;
  }
}
