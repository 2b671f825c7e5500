#pragma once

// Synthetic labelled events for exercising the pipeline without experiment
// data. The recipes are stylized caricatures of the physics processes, good
// enough to produce distinguishable images and feature vectors. They are not
// a simulation.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "event_model.hpp"
#include "random.hpp"
#include "selection.hpp"

namespace evimg {

struct Range {
  double lo = 0;
  double hi = 0;
};

struct DimuonRecipe {
  /// Mass intervals the pair mass is drawn from (uniformly in log mass,
  /// intervals weighted by their log width).
  std::vector<Range> mass_ranges;
  /// The first muon gets pT = (m / 2) * s with s log-uniform in this range,
  /// i.e. a decay with little transverse boost.
  Range pt_scale;
};

struct ComplexRecipe {
  std::string name;
  int n_leptons = 1;
  Range n_jets;         // inclusive integer range
  int n_bjets_min = 0;  // of the jets, how many carry a high b-tag
  Range lepton_pt;      // log-uniform, GeV
  Range jet_pt;         // log-uniform, GeV
  Range met_pt;         // log-uniform, GeV
  double jet_abs_eta = 2.3;
  double lepton_abs_eta = 2.4;
  double muon_fraction = 0.5;
};

struct GeneratorSpec {
  std::uint64_t seed = 1;
  std::vector<MassWindow> windows = default_dimuon_windows();
  /// Indexed by dimuon class id 0..4.
  std::vector<DimuonRecipe> dimuon;
  /// Indexed by complex class id (0 = ttbar signal, 1 = Drell-Yan, 2 = W+jets).
  std::vector<ComplexRecipe> complex;
  /// Half-width of the uniform eta difference between the muons.
  double max_delta_eta = 0.4;
  /// d_phi = pi - a with a uniform in [0, max_acollinearity] and random sign.
  double max_acollinearity = 0.3;
  double abs_eta_max = 2.4;
  int max_retries = 10000;

  static GeneratorSpec defaults(std::uint64_t seed = 1);

  void validate() const {
    MassWindowTable table(windows);
    if (dimuon.size() != windows.size() + 1)
      throw ConfigError("generator: need one dimuon recipe per class");
    for (std::size_t c = 0; c < dimuon.size(); ++c) {
      const auto& r = dimuon[c];
      if (r.mass_ranges.empty() || !(r.pt_scale.lo > 0) || !(r.pt_scale.hi >= r.pt_scale.lo))
        throw ConfigError("generator: bad dimuon recipe " + std::to_string(c));
      for (const auto& m : r.mass_ranges) {
        if (!(m.lo > 0) || !(m.hi > m.lo)) throw ConfigError("generator: bad mass range");
        if (c == 0) {
          for (const auto& w : table.windows())
            if (m.lo <= w.hi && w.lo <= m.hi)
              throw ConfigError("generator: class-0 mass range touches window " + w.name);
        } else {
          const auto& w = windows[c - 1];
          if (m.lo < w.lo || m.hi > w.hi)
            throw ConfigError("generator: mass range outside window " + w.name);
        }
      }
    }
  }
};

inline const std::vector<std::string>& complex_class_names() {
  static const std::vector<std::string> names = {"ttbar", "DrellYan", "WJets"};
  return names;
}

inline GeneratorSpec GeneratorSpec::defaults(std::uint64_t seed) {
  GeneratorSpec g;
  g.seed = seed;
  // Class 0 keeps a margin from every window so the labels stay learnable.
  g.dimuon = {
      {{{1.0, 2.4}, {15.0, 60.0}, {120.0, 200.0}}, {0.7, 1.4}},
      {{{2.94, 3.24}}, {0.7, 1.4}},
      {{{3.65, 3.95}}, {0.7, 1.4}},
      {{{6.46, 12.46}}, {0.7, 1.4}},
      {{{83.69, 98.69}}, {0.7, 1.4}},
  };
  g.complex = {
      // name, leptons, jets, b-jets, lepton pT, jet pT, MET
      {"ttbar", 1, {4, 6}, 2, {25, 150}, {35, 250}, {40, 200}},
      {"DrellYan", 2, {0, 1}, 0, {25, 120}, {32, 80}, {1.5, 15}},
      {"WJets", 1, {1, 3}, 0, {25, 120}, {32, 120}, {20, 80}},
  };
  return g;
}

/// Two muons whose pair mass lies in the class's window (class 0: in none).
/// The target mass, pT1, eta1, phi1, d_eta and d_phi are drawn and pT2 follows
/// from m^2 = 2 pT1 pT2 (cosh d_eta - cos d_phi). Draws that put the second
/// muon outside the eta acceptance or below 1 GeV, or whose exact massive
/// pair mass falls out of the class, are retried.
inline Event generate_dimuon(int class_id, const GeneratorSpec& spec, Rng& rng,
                             std::string id = {}) {
  if (class_id < 0 || class_id >= static_cast<int>(spec.dimuon.size()))
    throw InvalidInput("generate_dimuon: class " + std::to_string(class_id) + " has no recipe");
  const auto& recipe = spec.dimuon[class_id];
  const MassWindowTable windows(spec.windows);

  double total = 0;
  for (const auto& r : recipe.mass_ranges) total += std::log(r.hi / r.lo);

  for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
    double pick = rng.uniform() * total;
    Range mr = recipe.mass_ranges.back();
    for (const auto& r : recipe.mass_ranges) {
      const double w = std::log(r.hi / r.lo);
      if (pick < w) {
        mr = r;
        break;
      }
      pick -= w;
    }
    const double mass = rng.log_uniform(mr.lo, mr.hi);
    const double pt1 = 0.5 * mass * rng.log_uniform(recipe.pt_scale.lo, recipe.pt_scale.hi);
    const double eta1 = rng.uniform(-spec.abs_eta_max, spec.abs_eta_max);
    const double phi1 = rng.uniform(-kPi, kPi);
    const double deta = rng.uniform(-spec.max_delta_eta, spec.max_delta_eta);
    const double acol = rng.uniform(0.0, spec.max_acollinearity);
    const double dphi = rng.bernoulli(0.5) ? kPi - acol : acol - kPi;
    const double k = std::cosh(deta) - std::cos(dphi);
    if (!(k > 1e-6)) continue;
    const double pt2 = mass * mass / (2 * pt1 * k);
    const double eta2 = eta1 + deta;
    if (std::abs(eta2) > spec.abs_eta_max || pt2 < 1.0) continue;
    const double phi2 = wrap_phi(phi1 + dphi);

    Event ev;
    PhysicsObject a{ObjectKind::Muon, pt1, eta1, phi1, std::nullopt, std::nullopt, true};
    PhysicsObject b{ObjectKind::Muon, pt2, eta2, phi2, std::nullopt, std::nullopt, true};
    if (pt2 > pt1) std::swap(a, b);
    ev.objects = {a, b};
    ev.truth_class = class_id;
    // The label must survive the exact (massive) formula too.
    if (windows.classify(invariant_mass(a, b)) != class_id) continue;
    ev.id = std::move(id);
    return ev;
  }
  throw std::runtime_error("generate_dimuon: retry budget exhausted for class " +
                           std::to_string(class_id));
}

inline Event generate_complex(int class_id, const GeneratorSpec& spec, Rng& rng,
                              std::string id = {}) {
  if (class_id < 0 || class_id >= static_cast<int>(spec.complex.size()))
    throw InvalidInput("generate_complex: class " + std::to_string(class_id) + " has no recipe");
  const auto& r = spec.complex[class_id];
  Event ev;
  ev.id = std::move(id);
  ev.truth_class = class_id;
  const bool muons = rng.bernoulli(r.muon_fraction);
  for (int i = 0; i < r.n_leptons; ++i) {
    PhysicsObject l;
    l.kind = muons ? ObjectKind::Muon : ObjectKind::Electron;
    l.pt = rng.log_uniform(r.lepton_pt.lo, r.lepton_pt.hi);
    l.eta = rng.uniform(-r.lepton_abs_eta, r.lepton_abs_eta);
    l.phi = rng.uniform(-kPi, kPi);
    ev.objects.push_back(l);
  }
  const auto n_lo = static_cast<std::uint64_t>(r.n_jets.lo);
  const auto n_hi = static_cast<std::uint64_t>(r.n_jets.hi);
  const auto n_jets = static_cast<int>(n_lo + rng.below(n_hi - n_lo + 1));
  for (int i = 0; i < n_jets; ++i) {
    PhysicsObject j;
    j.kind = ObjectKind::Jet;
    j.pt = rng.log_uniform(r.jet_pt.lo, r.jet_pt.hi);
    j.eta = rng.uniform(-r.jet_abs_eta, r.jet_abs_eta);
    j.phi = rng.uniform(-kPi, kPi);
    j.btag = i < r.n_bjets_min ? rng.uniform(0.8, 1.0) : rng.uniform(0.0, 0.5);
    ev.objects.push_back(j);
  }
  PhysicsObject met;
  met.kind = ObjectKind::MET;
  met.pt = rng.log_uniform(r.met_pt.lo, r.met_pt.hi);
  met.phi = rng.uniform(-kPi, kPi);
  ev.met = met;
  return ev;
}

/// `per_class` events of every dimuon class, interleaved by class, ids "d<N>".
inline std::vector<Event> generate_dimuon_sample(std::size_t per_class, const GeneratorSpec& spec) {
  Rng rng(derive_seed(spec.seed, "synth.dimuon"));
  std::vector<Event> out;
  const auto n_classes = spec.dimuon.size();
  out.reserve(per_class * n_classes);
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < n_classes; ++c)
      out.push_back(generate_dimuon(static_cast<int>(c), spec, rng, "d" + std::to_string(out.size())));
  return out;
}

inline std::vector<Event> generate_complex_sample(std::size_t per_class,
                                                  const GeneratorSpec& spec) {
  Rng rng(derive_seed(spec.seed, "synth.complex"));
  std::vector<Event> out;
  const auto n_classes = spec.complex.size();
  out.reserve(per_class * n_classes);
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < n_classes; ++c)
      out.push_back(
          generate_complex(static_cast<int>(c), spec, rng, "c" + std::to_string(out.size())));
  return out;
}

} // namespace evimg
