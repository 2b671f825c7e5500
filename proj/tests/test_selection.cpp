#include <gtest/gtest.h>

#include "evimg/random.hpp"
#include "evimg/selection.hpp"
#include "evimg/synth.hpp"
#include "oracles.hpp"

using namespace evimg;

namespace {

PhysicsObject obj(ObjectKind k, double pt, double eta, double phi,
                  std::optional<double> btag = std::nullopt) {
  return {k, pt, eta, phi, std::nullopt, btag, true};
}

} // namespace

TEST(Classify, ExampleMasses) {
  EXPECT_EQ(classify_dimuon(3.01), 1);
  EXPECT_EQ(classify_dimuon(95.76), 4);
  EXPECT_EQ(classify_dimuon(15.52), 0);
}

TEST(Classify, ClosedBoundaries) {
  for (const auto& w : default_dimuon_windows()) {
    EXPECT_EQ(classify_dimuon(w.lo), w.class_id) << w.name;
    EXPECT_EQ(classify_dimuon(w.hi), w.class_id) << w.name;
    EXPECT_EQ(classify_dimuon(std::nextafter(w.lo, 0.0)), 0) << w.name;
    EXPECT_EQ(classify_dimuon(std::nextafter(w.hi, 1e9)), 0) << w.name;
  }
  EXPECT_EQ(classify_dimuon(0.0), 0);
  EXPECT_THROW(classify_dimuon(-1.0), InvalidInput);
}

TEST(Classify, AgreesWithLinearScan) {
  Rng rng(99);
  const auto windows = default_dimuon_windows();
  const MassWindowTable table(windows);
  for (int i = 0; i < 100000; ++i) {
    const double m = rng.uniform(0.0, 200.0);
    ASSERT_EQ(classify_dimuon(m, table), oracle::window_scan(m, windows)) << m;
  }
}

TEST(Classify, OverlappingWindowsRejected) {
  auto w = default_dimuon_windows();
  w[1].lo = 3.0; // overlaps J/psi
  EXPECT_THROW(MassWindowTable{w}, ConfigError);
  auto bad = default_dimuon_windows();
  bad[0].hi = bad[0].lo;
  EXPECT_THROW(MassWindowTable{bad}, ConfigError);
}

TEST(Classify, WindowsSurviveJson) {
  const nlohmann::json j = default_dimuon_windows();
  EXPECT_EQ(j.get<std::vector<MassWindow>>(), default_dimuon_windows());
}

TEST(Select, SingleMuonNoJets) {
  Event ev{"a", {obj(ObjectKind::Muon, 25, 0, 0)}, std::nullopt, std::nullopt};
  auto s = select_complex_event(ev, {});
  ASSERT_TRUE(s);
  EXPECT_EQ(s->objects.size(), 1u);
}

TEST(Select, StrictLeptonThreshold) {
  Event ev{"b", {obj(ObjectKind::Muon, 19.9, 0, 0)}, std::nullopt, std::nullopt};
  EXPECT_FALSE(select_complex_event(ev, {}));
  ev.objects[0].pt = 20.0;
  EXPECT_FALSE(select_complex_event(ev, {}));
}

TEST(Select, JetCutsAndBtag) {
  Event ev{"c",
           {obj(ObjectKind::Muon, 40, 0, 0), obj(ObjectKind::Jet, 35, 2.5, 0.3),
            obj(ObjectKind::Jet, 35, 1.0, 0.3, 0.9), obj(ObjectKind::Jet, 25, 0.5, 0.3)},
           std::nullopt,
           std::nullopt};
  auto s = select_complex_event(ev, {});
  ASSERT_TRUE(s);
  ASSERT_EQ(s->objects.size(), 2u);
  EXPECT_EQ(s->objects[1].kind, ObjectKind::BJet);
  EXPECT_EQ(s->objects[1].eta, 1.0);
}

TEST(Select, BtagThresholdInclusive) {
  SelectionConfig cfg;
  Event ev{"d", {obj(ObjectKind::Electron, 40, 0, 0), obj(ObjectKind::BJet, 50, 0, 0, 0.5)},
           std::nullopt, std::nullopt};
  auto s = select_complex_event(ev, cfg);
  EXPECT_EQ(s->objects[1].kind, ObjectKind::Jet);
  ev.objects[1].btag = cfg.btag_threshold;
  EXPECT_EQ(select_complex_event(ev, cfg)->objects[1].kind, ObjectKind::BJet);
}

TEST(Select, QualityFlagAndSingleLepton) {
  Event ev{"e", {obj(ObjectKind::Muon, 40, 0, 0), obj(ObjectKind::Electron, 30, 0, 1)},
           std::nullopt, std::nullopt};
  SelectionConfig single;
  single.require_single_lepton = true;
  EXPECT_TRUE(select_complex_event(ev, {}));
  EXPECT_FALSE(select_complex_event(ev, single));
  ev.objects[1].quality = false;
  auto s = select_complex_event(ev, single);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->objects.size(), 1u);
}

TEST(Select, MetPassesThrough) {
  Event ev{"f", {obj(ObjectKind::Muon, 40, 0, 0)}, obj(ObjectKind::MET, 55, 0, -2.0), 2};
  auto s = select_complex_event(ev, {});
  ASSERT_TRUE(s);
  EXPECT_EQ(s->met, ev.met);
  EXPECT_EQ(s->truth_class, 2);
}

TEST(Select, IdempotentAndMonotone) {
  auto spec = GeneratorSpec::defaults(3);
  Rng rng(8);
  std::vector<Event> evs;
  for (int i = 0; i < 600; ++i) evs.push_back(generate_complex(i % 3, spec, rng, std::to_string(i)));
  std::size_t prev = evs.size() + 1;
  for (double cut : {0.0, 20.0, 30.0, 50.0, 80.0, 120.0}) {
    SelectionConfig cfg;
    cfg.lepton_pt_min = cut;
    std::size_t n = 0;
    for (const auto& ev : evs) {
      auto s = select_complex_event(ev, cfg);
      if (!s) continue;
      ++n;
      EXPECT_EQ(select_complex_event(*s, cfg), s);
    }
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(SelectionConfig, Validation) {
  SelectionConfig c;
  EXPECT_NO_THROW(c.validate());
  c.jet_abs_eta_max = 3.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lepton_pt_min = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}
