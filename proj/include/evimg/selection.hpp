#pragma once

// Preselection for lepton+jets events and mass-window labels for dimuon pairs.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "event_model.hpp"

namespace evimg {

struct SelectionConfig {
  double lepton_pt_min = 20.0;   // GeV, strict
  double jet_pt_min = 30.0;      // GeV, strict
  double jet_abs_eta_max = 2.4;  // strict
  double btag_threshold = 0.679; // CSV medium working point, inclusive
  bool require_single_lepton = false;

  void validate() const {
    if (!(lepton_pt_min >= 0) || !(jet_pt_min >= 0) || !(jet_abs_eta_max >= 0) ||
        !(btag_threshold >= 0))
      throw ConfigError("selection: thresholds must be >= 0");
    if (jet_abs_eta_max > 3.0) throw ConfigError("selection: jet_abs_eta_max must be <= 3");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SelectionConfig, lepton_pt_min, jet_pt_min,
                                                jet_abs_eta_max, btag_threshold,
                                                require_single_lepton)

/// Apply the lepton, jet and b-tag cuts.
///
/// Returns std::nullopt unless at least one quality lepton (exactly one with
/// require_single_lepton) has pT above the threshold. Surviving leptons and
/// jets keep their input order; jets carrying a b-tag value are relabelled
/// BJet or Jet against the threshold. MET is passed through.
inline std::optional<Event> select_complex_event(const Event& ev, const SelectionConfig& cfg) {
  Event out;
  out.id = ev.id;
  out.met = ev.met;
  out.truth_class = ev.truth_class;
  std::size_t leptons = 0;
  for (const auto& o : ev.objects) {
    if (is_lepton(o.kind)) {
      if (o.quality && o.pt > cfg.lepton_pt_min) {
        out.objects.push_back(o);
        ++leptons;
      }
    } else if (is_jet(o.kind)) {
      if (o.pt > cfg.jet_pt_min && std::abs(o.eta) < cfg.jet_abs_eta_max) {
        PhysicsObject jet = o;
        if (jet.btag) jet.kind = *jet.btag >= cfg.btag_threshold ? ObjectKind::BJet : ObjectKind::Jet;
        out.objects.push_back(jet);
      }
    } else if (o.kind == ObjectKind::MET) {
      out.objects.push_back(o);
    }
  }
  if (leptons == 0) return std::nullopt;
  if (cfg.require_single_lepton && leptons != 1) return std::nullopt;
  return out;
}

struct MassWindow {
  int class_id = 0;
  std::string name;
  double lo = 0; // GeV/c^2, closed
  double hi = 0;

  bool contains(double m) const { return m >= lo && m <= hi; }
  bool operator==(const MassWindow&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MassWindow, class_id, name, lo, hi)

/// The four dimuon resonance windows. Class 0 is everything else.
inline std::vector<MassWindow> default_dimuon_windows() {
  return {{1, "JPsi", 2.94, 3.24},
          {2, "PsiPrime", 3.65, 3.95},
          {3, "Upsilon", 6.46, 12.46},
          {4, "Z", 83.69, 98.69}};
}

inline std::vector<std::string> dimuon_class_names() {
  return {"None", "JPsi", "PsiPrime", "Upsilon", "Z"};
}

/// Sorted, validated lookup over disjoint closed mass windows.
class MassWindowTable {
public:
  explicit MassWindowTable(std::vector<MassWindow> windows = default_dimuon_windows())
      : windows_(std::move(windows)) {
    for (const auto& w : windows_) {
      if (!(w.lo < w.hi)) throw ConfigError("mass window '" + w.name + "': lo must be < hi");
      if (w.class_id <= 0) throw ConfigError("mass window '" + w.name + "': class_id must be > 0");
    }
    std::sort(windows_.begin(), windows_.end(),
              [](const MassWindow& a, const MassWindow& b) { return a.lo < b.lo; });
    for (std::size_t i = 1; i < windows_.size(); ++i)
      if (windows_[i].lo <= windows_[i - 1].hi)
        throw ConfigError("mass windows '" + windows_[i - 1].name + "' and '" + windows_[i].name +
                          "' overlap");
  }

  /// Class whose window contains the mass, or 0.
  int classify(double mass) const {
    auto it = std::upper_bound(windows_.begin(), windows_.end(), mass,
                               [](double m, const MassWindow& w) { return m < w.lo; });
    if (it == windows_.begin()) return 0;
    --it;
    return mass <= it->hi ? it->class_id : 0;
  }

  const std::vector<MassWindow>& windows() const { return windows_; }

private:
  std::vector<MassWindow> windows_;
};

inline int classify_dimuon(double mass, const MassWindowTable& table) {
  if (!(mass >= 0)) throw InvalidInput("classify_dimuon: mass must be >= 0");
  return table.classify(mass);
}

inline int classify_dimuon(double mass) {
  static const MassWindowTable table;
  return classify_dimuon(mass, table);
}

/// Invariant mass of the two leading muons, if the event has two.
inline std::optional<double> dimuon_mass(const Event& ev) {
  std::vector<const PhysicsObject*> muons;
  for (const auto& o : ev.objects)
    if (o.kind == ObjectKind::Muon) muons.push_back(&o);
  if (muons.size() < 2) return std::nullopt;
  std::stable_sort(muons.begin(), muons.end(),
                   [](const PhysicsObject* a, const PhysicsObject* b) { return a->pt > b->pt; });
  return invariant_mass(*muons[0], *muons[1]);
}

} // namespace evimg
