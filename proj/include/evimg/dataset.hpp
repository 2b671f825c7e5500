#pragma once

// Stratified train/val/test splitting, class balancing by replicating training
// entries, and emission of the image tree plus its JSON manifest.
//
// Layout: <out>/<split>/<class_name>/<event_id>[_r<N>].png, with manifest.json
// at <out>/. Replicas are separate files with identical bytes.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "png.hpp"
#include "random.hpp"
#include "render.hpp"

namespace evimg {

enum class Split { Train = 0, Val = 1, Test = 2 };
inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Val, Split::Test};

inline const char* to_string(Split s) {
  switch (s) {
  case Split::Train: return "train";
  case Split::Val: return "val";
  case Split::Test: return "test";
  }
  return "?";
}

struct LabelledId {
  std::string event_id;
  int class_id = 0;
};

struct ManifestEntry {
  std::string event_id;
  int class_id = 0;
  int replication_index = 0;
  std::string image_path; // relative to the dataset root

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::array<std::vector<ManifestEntry>, 3> splits;
  /// Per-class training targets used for balancing; empty if not balanced.
  std::map<int, std::size_t> balance_targets;

  std::vector<ManifestEntry>& entries(Split s) { return splits[static_cast<int>(s)]; }
  const std::vector<ManifestEntry>& entries(Split s) const { return splits[static_cast<int>(s)]; }

  std::map<int, std::size_t> counts(Split s) const {
    std::map<int, std::size_t> out;
    for (int c = 0; c < static_cast<int>(class_names.size()); ++c) out[c] = 0;
    for (const auto& e : entries(s)) ++out[e.class_id];
    return out;
  }

  std::string class_name(int c) const {
    if (c >= 0 && c < static_cast<int>(class_names.size())) return class_names[c];
    return "class" + std::to_string(c);
  }

  bool operator==(const DatasetManifest&) const = default;
};

/// File-system safe version of an event id.
inline std::string sanitize_id(const std::string& id) {
  std::string out;
  out.reserve(id.size());
  for (unsigned char c : id)
    out += (std::isalnum(c) || c == '-' || c == '_' || c == '.') ? static_cast<char>(c) : '_';
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

inline void assign_image_paths(DatasetManifest& m) {
  for (auto s : kSplits) {
    for (auto& e : m.entries(s)) {
      std::string name = sanitize_id(e.event_id);
      if (e.replication_index > 0) name += "_r" + std::to_string(e.replication_index);
      e.image_path = std::string(to_string(s)) + "/" + sanitize_id(m.class_name(e.class_id)) + "/" +
                     name + ".png";
    }
  }
}

namespace detail {

inline std::map<int, std::vector<std::string>> group_by_class(const std::vector<LabelledId>& items) {
  std::set<std::string> seen;
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& it : items) {
    if (it.class_id < 0) throw InvalidInput("split: negative class id for event " + it.event_id);
    if (!seen.insert(it.event_id).second)
      throw InvalidInput("split: duplicate event id '" + it.event_id + "'");
    by_class[it.class_id].push_back(it.event_id);
  }
  return by_class;
}

template <class SizeFn>
DatasetManifest split_with(const std::vector<LabelledId>& items, std::uint64_t seed,
                           std::vector<std::string> class_names, SizeFn sizes) {
  DatasetManifest m;
  m.seed = seed;
  auto by_class = group_by_class(items);
  int max_class = -1;
  for (const auto& [c, ids] : by_class) max_class = std::max(max_class, c);
  if (static_cast<int>(class_names.size()) <= max_class) class_names.resize(static_cast<std::size_t>(max_class) + 1);
  for (std::size_t c = 0; c < class_names.size(); ++c)
    if (class_names[c].empty()) class_names[c] = "class" + std::to_string(c);
  m.class_names = std::move(class_names);

  for (auto& [c, ids] : by_class) {
    if (ids.size() < 3)
      throw InvalidInput("split: class '" + m.class_names[c] + "' has only " +
                         std::to_string(ids.size()) + " events (need >= 3)");
    Rng rng(derive_seed(seed, "dataset.split." + std::to_string(c)));
    rng.shuffle(ids);
    const auto [n_train, n_val] = sizes(c, ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const Split s = i < n_train ? Split::Train : i < n_train + n_val ? Split::Val : Split::Test;
      m.entries(s).push_back({ids[i], c, 0, {}});
    }
  }
  assign_image_paths(m);
  return m;
}

} // namespace detail

/// Per-class shuffle with the seed, then cut each class by the ratios
/// (val and test rounded, train takes the rest, so every split is within one
/// of ratio * class size).
inline DatasetManifest split(const std::vector<LabelledId>& items, std::array<double, 3> ratios,
                             std::uint64_t seed, std::vector<std::string> class_names = {}) {
  for (double r : ratios)
    if (!(r >= 0)) throw ConfigError("split: ratios must be >= 0");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw ConfigError("split: ratios must sum to 1");
  auto m = detail::split_with(items, seed, std::move(class_names), [&](int, std::size_t n) {
    const auto n_val = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(ratios[2] * static_cast<double>(n)));
    if (n_val + n_test > n) throw ConfigError("split: ratios leave no room for training");
    return std::pair<std::size_t, std::size_t>{n - n_val - n_test, n_val};
  });
  m.ratios = ratios;
  return m;
}

/// Fixed validation and test counts per class; the remainder trains.
inline DatasetManifest split_fixed(const std::vector<LabelledId>& items, std::size_t val_per_class,
                                   std::size_t test_per_class, std::uint64_t seed,
                                   std::vector<std::string> class_names = {}) {
  auto m = detail::split_with(items, seed, std::move(class_names), [&](int c, std::size_t n) {
    if (n < val_per_class + test_per_class + 1)
      throw InvalidInput("split_fixed: class " + std::to_string(c) + " has only " +
                         std::to_string(n) + " events");
    return std::pair<std::size_t, std::size_t>{n - val_per_class - test_per_class, val_per_class};
  });
  const double total = static_cast<double>(items.size());
  for (auto s : kSplits) m.ratios[static_cast<int>(s)] = static_cast<double>(m.entries(s).size()) / total;
  return m;
}

/// Top up every class below its target by cycling through its entries in a
/// seeded shuffled order; each pass over the class bumps replication_index.
/// Classes at or above target are left as they are.
inline std::vector<ManifestEntry> balance_by_replication(std::vector<ManifestEntry> train,
                                                         const std::map<int, std::size_t>& targets,
                                                         std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < train.size(); ++i) by_class[train[i].class_id].push_back(i);
  for (const auto& [c, target] : targets) {
    auto it = by_class.find(c);
    if (it == by_class.end() || it->second.empty()) {
      if (target == 0) continue;
      throw InvalidInput("balance_by_replication: class " + std::to_string(c) + " has no entries");
    }
    std::vector<std::size_t> order = it->second;
    const std::size_t have = order.size();
    if (target <= have) continue;
    Rng rng(derive_seed(seed, "dataset.balance." + std::to_string(c)));
    rng.shuffle(order);
    for (std::size_t k = 0; k < target - have; ++k) {
      ManifestEntry copy = train[order[k % have]];
      copy.replication_index = static_cast<int>(1 + k / have);
      train.push_back(std::move(copy));
    }
  }
  return train;
}

/// Largest per-class count, applied to every class.
inline std::map<int, std::size_t> max_count_targets(const std::map<int, std::size_t>& counts) {
  std::size_t mx = 0;
  for (const auto& [c, n] : counts) mx = std::max(mx, n);
  std::map<int, std::size_t> out;
  for (const auto& [c, n] : counts) out[c] = mx;
  return out;
}

inline void balance_manifest(DatasetManifest& m, std::map<int, std::size_t> targets) {
  if (targets.empty()) targets = max_count_targets(m.counts(Split::Train));
  m.entries(Split::Train) =
      balance_by_replication(std::move(m.entries(Split::Train)), targets, derive_seed(m.seed, "balance"));
  m.balance_targets = std::move(targets);
  assign_image_paths(m);
}

// ---------------------------------------------------------------------------
// Manifest JSON

inline constexpr const char* kManifestFormat = "evimg-manifest";

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["format"] = kManifestFormat;
  j["version"] = 1;
  j["seed"] = m.seed;
  j["ratios"] = m.ratios;
  j["class_names"] = m.class_names;
  nlohmann::json targets = nlohmann::json::object();
  for (const auto& [c, n] : m.balance_targets) targets[m.class_name(c)] = n;
  j["balance_targets"] = targets;
  for (auto s : kSplits) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [c, n] : m.counts(s)) counts[m.class_name(c)] = n;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : m.entries(s))
      entries.push_back({{"event_id", e.event_id},
                         {"class_id", e.class_id},
                         {"replication_index", e.replication_index},
                         {"image_path", e.image_path}});
    j["splits"][to_string(s)] = {{"counts", counts}, {"entries", entries}};
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kManifestFormat) throw ConfigError("not a dataset manifest");
  DatasetManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.ratios = j.at("ratios").get<std::array<double, 3>>();
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& [name, n] : j.at("balance_targets").items()) {
    auto it = std::find(m.class_names.begin(), m.class_names.end(), name);
    if (it == m.class_names.end()) throw ConfigError("manifest: unknown class '" + name + "'");
    m.balance_targets[static_cast<int>(it - m.class_names.begin())] = n.get<std::size_t>();
  }
  for (auto s : kSplits)
    for (const auto& e : j.at("splits").at(to_string(s)).at("entries"))
      m.entries(s).push_back({e.at("event_id").get<std::string>(), e.at("class_id").get<int>(),
                              e.at("replication_index").get<int>(),
                              e.at("image_path").get<std::string>()});
  return m;
}

/// Write text via a temporary file and rename, so readers never see a partial file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp);
    out << text;
    out.close();
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Emission

struct WriteOptions {
  bool dry_run = false;
  unsigned threads = 1;
};

struct WriteSummary {
  std::array<std::size_t, 3> images{};
  std::size_t files_written = 0;
  std::size_t unique_renders = 0;
  double wall_seconds = 0;

  nlohmann::json to_json() const {
    return {{"train", images[0]},         {"val", images[1]},
            {"test", images[2]},          {"files_written", files_written},
            {"unique_renders", unique_renders}, {"wall_seconds", wall_seconds}};
  }
};

using EventRenderer = std::function<ImageTensor(const std::string& event_id)>;

/// Render every manifest entry to its PNG and then write manifest.json.
///
/// Each distinct event is rendered once and its bytes written to all of its
/// paths. Work is spread over `threads` workers; since every file has exactly
/// one writer, the tree does not depend on the worker count. The manifest is
/// written only after every image is on disk.
inline WriteSummary write_dataset(const DatasetManifest& manifest, const EventRenderer& render,
                                  const std::filesystem::path& out_dir, WriteOptions opts = {}) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  WriteSummary summary;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  for (auto s : kSplits) {
    summary.images[static_cast<int>(s)] = manifest.entries(s).size();
    for (const auto& name : manifest.class_names) {
      fs::create_directories(out_dir / to_string(s) / sanitize_id(name), ec);
      if (ec) throw IoError("cannot create split directory: " + ec.message());
    }
  }

  if (!opts.dry_run) {
    // event id -> all paths showing it, in manifest order
    std::map<std::string, std::vector<std::string>> jobs_by_id;
    std::vector<std::string> order;
    for (auto s : kSplits)
      for (const auto& e : manifest.entries(s)) {
        auto [it, inserted] = jobs_by_id.try_emplace(e.event_id);
        if (inserted) order.push_back(e.event_id);
        it->second.push_back(e.image_path);
      }
    summary.unique_renders = order.size();

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> written{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
      while (!failed) {
        const std::size_t i = next++;
        if (i >= order.size()) return;
        try {
          const auto bytes = encode_png(render(order[i]));
          for (const auto& rel : jobs_by_id.at(order[i])) {
            write_file_bytes(out_dir / rel, bytes);
            ++written;
          }
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed = true;
        }
      }
    };
    const unsigned n_threads = std::max(1u, opts.threads);
    if (n_threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    summary.files_written = written;
    if (first_error) {
      std::string why = "unknown error";
      try {
        std::rethrow_exception(first_error);
      } catch (const std::exception& e) {
        why = e.what();
      }
      throw IoError("dataset write aborted after " + std::to_string(summary.files_written) +
                    " image files; manifest.json not written: " + why);
    }
  }

  write_text_atomic(out_dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return summary;
}

} // namespace evimg
