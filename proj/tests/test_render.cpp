#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "evimg/ingest.hpp"
#include "evimg/png.hpp"
#include "evimg/random.hpp"
#include "evimg/render.hpp"
#include "evimg/synth.hpp"
#include "oracles.hpp"

using namespace evimg;

namespace {

const Rgb kGreen{0, 200, 0};

std::vector<int> mask_of(const ImageTensor& img, Rgb bg) {
  std::vector<int> m(static_cast<std::size_t>(img.width()) * img.height(), 0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m[static_cast<std::size_t>(y) * img.width() + x] = !(img.at(x, y) == bg);
  return m;
}

std::set<std::pair<int, int>> drawn(const ImageTensor& img, Rgb bg) {
  std::set<std::pair<int, int>> s;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!(img.at(x, y) == bg)) s.insert({x, y});
  return s;
}

} // namespace

TEST(Radius, Examples) {
  CanvasSpec s;
  EXPECT_EQ(radius_for(std::exp(1.0), s), 11);
  EXPECT_EQ(radius_for(1.0, s), 1);
  EXPECT_EQ(radius_for(100.0, s), 48);
  EXPECT_EQ(radius_for(0.2, s), 1);
  EXPECT_THROW(radius_for(0.0, s), InvalidInput);
  EXPECT_THROW(radius_for(-2.0, s), InvalidInput);
  EXPECT_THROW(radius_for(std::numeric_limits<double>::infinity(), s), InvalidInput);
}

TEST(Radius, HalfRoundsAwayFromZero) {
  CanvasSpec s;
  s.scale_c = 1.0;
  // C ln v = 2.5 exactly is not representable; use values straddling it.
  EXPECT_EQ(radius_for(std::exp(2.5000001), s), 3);
  EXPECT_EQ(radius_for(std::exp(2.4999999), s), 2);
}

TEST(Radius, Monotone) {
  CanvasSpec s;
  int prev = 0;
  for (double v = 1.0; v < 5000; v *= 1.01) {
    const int r = radius_for(v, s);
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(Pixel, Examples) {
  CanvasSpec s;
  EXPECT_EQ(to_pixel(0, 0, s), (Pixel{112, 112}));
  EXPECT_EQ(to_pixel(-3, -kPi, s), (Pixel{0, 0}));
  EXPECT_EQ(to_pixel(1.5, kPi / 2, s), (Pixel{168, 168}));
  EXPECT_EQ(to_pixel(3, kPi, s), (Pixel{223, 223}));
  EXPECT_EQ(to_pixel(-9, 9, s), (Pixel{0, 223}));
  EXPECT_EQ(to_pixel(std::nan(""), 0, s).x, 0);
}

TEST(Circle, RadiusOneNeighbours) {
  ImageTensor img(224, 224);
  rasterize_circle(img, {112, 112}, 1, kGreen);
  // d = 1 rounds to 1, d = sqrt 2 = 1.41 rounds to 1 too.
  const auto s = drawn(img, {255, 255, 255});
  EXPECT_EQ(s.size(), 8u);
  EXPECT_EQ(mask_of(img, {255, 255, 255}), oracle::circle_mask(224, 224, 112, 112, 1));
}

TEST(Circle, CornerQuarterArc) {
  ImageTensor img(224, 224);
  rasterize_circle(img, {0, 0}, 20, kGreen);
  EXPECT_EQ(mask_of(img, {255, 255, 255}), oracle::circle_mask(224, 224, 0, 0, 20));
  for (const auto& [x, y] : drawn(img, {255, 255, 255})) {
    EXPECT_GE(x, 0);
    EXPECT_GE(y, 0);
  }
}

TEST(Circle, BackgroundColourStillApplied) {
  ImageTensor img(50, 50, {255, 255, 255});
  rasterize_circle(img, {25, 25}, 5, {255, 255, 255});
  EXPECT_EQ(img, ImageTensor(50, 50, {255, 255, 255}));
  rasterize_circle(img, {25, 25}, 5, kGreen);
  rasterize_circle(img, {25, 25}, 5, {255, 255, 255});
  EXPECT_EQ(img, ImageTensor(50, 50, {255, 255, 255}));
  EXPECT_THROW(rasterize_circle(img, {25, 25}, 0, kGreen), InvalidInput);
}

TEST(Circle, MatchesOracleRandom) {
  Rng rng(31);
  for (int i = 0; i < 100; ++i) {
    const int w = 224, h = 224;
    const int cx = static_cast<int>(rng.below(w + 80)) - 40;
    const int cy = static_cast<int>(rng.below(h + 80)) - 40;
    const int r = 1 + static_cast<int>(rng.below(60));
    ImageTensor img(w, h);
    rasterize_circle(img, {cx, cy}, r, kGreen);
    ASSERT_EQ(mask_of(img, {255, 255, 255}), oracle::circle_mask(w, h, cx, cy, r))
        << cx << "," << cy << " r=" << r;
  }
}

TEST(Render, EmptyEventIsBackground) {
  EXPECT_EQ(render_event(Event{"e", {}, std::nullopt, std::nullopt}, {}), ImageTensor(224, 224));
}

TEST(Render, SingleMuon) {
  CanvasSpec s;
  Event ev{"m", {{ObjectKind::Muon, std::exp(2.0), 0, 0, std::nullopt, std::nullopt, true}},
           std::nullopt, std::nullopt};
  const auto img = render_event(ev, s);
  EXPECT_EQ(img.at(112 + 21, 112), kGreen);
  EXPECT_EQ(img.at(112, 112), (Rgb{255, 255, 255}));
  EXPECT_EQ(img, oracle::render(ev, s));
}

TEST(Render, MetAtEtaZeroInBlack) {
  CanvasSpec s;
  Event ev{"met", {}, PhysicsObject{ObjectKind::MET, std::exp(1.0), 2.7, 0, std::nullopt, std::nullopt, true},
           std::nullopt};
  const auto img = render_event(ev, s);
  EXPECT_EQ(img.at(112 + 11, 112), (Rgb{0, 0, 0}));
}

TEST(Render, EnergySizingUsesCoshEta) {
  CanvasSpec s;
  s.size_variable = SizeVariable::Energy;
  Event ev{"e", {{ObjectKind::Muon, 10.0, 2.0, 0, std::nullopt, std::nullopt, true}}, std::nullopt,
           std::nullopt};
  const int r = radius_for(std::sqrt(std::pow(10 * std::cosh(2.0), 2) + kMuonMass * kMuonMass), s);
  EXPECT_GT(r, radius_for(10.0, s));
  const auto c = to_pixel(2.0, 0, s);
  EXPECT_EQ(render_event(ev, s).at(c.x - r, c.y), kGreen);
}

TEST(Render, DrawOrderLeptonsOverJets) {
  CanvasSpec s;
  // Same centre and radius: the muon wins over the jet whatever the input order.
  Event ev{"o",
           {{ObjectKind::Muon, 50, 0, 0, std::nullopt, std::nullopt, true},
            {ObjectKind::Jet, 50, 0, 0, std::nullopt, std::nullopt, true},
            {ObjectKind::BJet, 50, 0, 0, std::nullopt, std::nullopt, true},
            {ObjectKind::Electron, 50, 0, 0, std::nullopt, std::nullopt, true}},
           PhysicsObject{ObjectKind::MET, 50, 0, 0, std::nullopt, std::nullopt, true}, std::nullopt};
  const int r = radius_for(50, s);
  EXPECT_EQ(render_event(ev, s).at(112 + r, 112), kGreen);
  ev.objects.erase(ev.objects.begin());
  EXPECT_EQ(render_event(ev, s).at(112 + r, 112), (Rgb{0, 0, 255}));
  ev.objects.pop_back();
  EXPECT_EQ(render_event(ev, s).at(112 + r, 112), (Rgb{150, 0, 0}));
}

TEST(Render, SkipsNonPositiveSizes) {
  Event ev{"z", {{ObjectKind::Jet, 0.0, 0, 0, std::nullopt, std::nullopt, true}},
           PhysicsObject{ObjectKind::MET, 0.0, 0, 0, std::nullopt, std::nullopt, true}, std::nullopt};
  RenderStats st;
  EXPECT_EQ(render_event(ev, {}, &st), ImageTensor(224, 224));
  EXPECT_EQ(st.skipped, 2u);
  EXPECT_EQ(st.drawn, 0u);
}

TEST(Render, MatchesOracleOnSyntheticEvents) {
  auto gen = GeneratorSpec::defaults(5);
  Rng rng(6);
  CanvasSpec pt_spec, e_spec;
  e_spec.size_variable = SizeVariable::Energy;
  for (int i = 0; i < 12; ++i) {
    const auto c = generate_complex(i % 3, gen, rng, "c");
    EXPECT_EQ(render_event(c, pt_spec), oracle::render(c, pt_spec)) << i;
    const auto d = generate_dimuon(i % 5, gen, rng, "d");
    EXPECT_EQ(render_event(d, e_spec), oracle::render(d, e_spec)) << i;
  }
}

TEST(Render, OnlyPaletteColours) {
  auto gen = GeneratorSpec::defaults(5);
  Rng rng(9);
  CanvasSpec s;
  std::set<std::array<int, 3>> palette{{255, 255, 255}};
  for (auto k : kAllKinds) palette.insert({s.color(k).r, s.color(k).g, s.color(k).b});
  for (int i = 0; i < 20; ++i) {
    const auto img = render_event(generate_complex(i % 3, gen, rng, "c"), s);
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const auto p = img.at(x, y);
        ASSERT_TRUE(palette.count({p.r, p.g, p.b}));
      }
  }
}

TEST(Render, PhiTranslationCovariance) {
  CanvasSpec s;
  Event ev{"t",
           {{ObjectKind::Muon, 8, -1.0, -0.5, std::nullopt, std::nullopt, true},
            {ObjectKind::Jet, 12, 0.8, 0.2, std::nullopt, std::nullopt, true}},
           std::nullopt, std::nullopt};
  const auto base = drawn(render_event(ev, s), s.background);
  const double pixel = 2 * kPi / s.height;
  for (int k : {-7, 3, 11}) {
    Event shifted = ev;
    // Shift by whole pixels, nudged to the cell middle so floor is stable.
    for (auto& o : shifted.objects) {
      const double cell = std::floor((o.phi + kPi) / pixel);
      o.phi = (cell + k + 0.5) * pixel - kPi;
    }
    Event centred = ev;
    for (auto& o : centred.objects) o.phi = (std::floor((o.phi + kPi) / pixel) + 0.5) * pixel - kPi;
    const auto a = drawn(render_event(centred, s), s.background);
    EXPECT_EQ(a, base);
    std::set<std::pair<int, int>> moved;
    for (auto [x, y] : a) moved.insert({x, y + k});
    EXPECT_EQ(drawn(render_event(shifted, s), s.background), moved) << k;
  }
}

TEST(Render, Deterministic) {
  auto gen = GeneratorSpec::defaults(5);
  Rng rng(10);
  const auto ev = generate_complex(0, gen, rng, "x");
  EXPECT_EQ(encode_png(render_event(ev, {})), encode_png(render_event(ev, {})));
}

TEST(Png, RoundTrip) {
  const ImageTensor white(224, 224);
  EXPECT_EQ(decode_png(encode_png(white)), white);
  ImageTensor one(1, 1, {1, 2, 3});
  const auto bytes = encode_png(one);
  EXPECT_EQ(bytes[1], 'P');
  EXPECT_EQ(decode_png(bytes), one);
  auto gen = GeneratorSpec::defaults(5);
  Rng rng(12);
  const auto img = render_event(generate_complex(0, gen, rng, "x"), {});
  EXPECT_EQ(decode_png(encode_png(img)), img);
  EXPECT_THROW(decode_png({1, 2, 3}), InvalidInput);
}

TEST(CanvasSpec, JsonAndValidation) {
  CanvasSpec s;
  s.scale_c = 9.0;
  s.size_variable = SizeVariable::Energy;
  nlohmann::json j = s;
  CanvasSpec back = j.get<CanvasSpec>();
  EXPECT_EQ(back.scale_c, 9.0);
  EXPECT_EQ(back.size_variable, SizeVariable::Energy);
  EXPECT_EQ(back.colors, s.colors);
  s.colors[0] = s.background;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Golden, MatchesReferenceImages) {
  const std::filesystem::path dir = EVIMG_FIXTURES "/golden";
  std::ifstream in(dir / "events.ndjson", std::ios::binary);
  ASSERT_TRUE(in) << "missing fixtures; run golden_gen";
  const auto events = read_all_events(in);
  ASSERT_EQ(events.size(), 5u);
  std::ifstream cj(dir / "canvases.json");
  const auto canvases = nlohmann::json::parse(cj);
  for (const auto& ev : events) {
    const auto spec = canvases.at(ev.id).get<CanvasSpec>();
    const auto img = render_event(ev, spec);
    const auto file = read_file_bytes(dir / (ev.id + ".png"));
    EXPECT_EQ(decode_png(file), img) << ev.id;
    // bytes also match as long as libpng/zlib settings are unchanged
    EXPECT_EQ(encode_png(img), file) << ev.id;
  }
}
