#pragma once

// Kinematic types for reconstructed collision events and the two-body
// invariant-mass formulas used to label dimuon pairs.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace evimg {

inline constexpr double kMuonMass = 0.10566;      // GeV/c^2
inline constexpr double kElectronMass = 0.000511; // GeV/c^2
inline constexpr double kPi = std::numbers::pi;

/// Slack on E^2 - p^2 for objects built as massless.
inline constexpr double kMassSquaredSlack = 1e-6;

enum class ObjectKind { Electron, Muon, Jet, BJet, MET };

inline constexpr std::array<ObjectKind, 5> kAllKinds = {
    ObjectKind::Electron, ObjectKind::Muon, ObjectKind::Jet, ObjectKind::BJet, ObjectKind::MET};

inline std::string_view to_string(ObjectKind k) {
  switch (k) {
  case ObjectKind::Electron: return "electron";
  case ObjectKind::Muon: return "muon";
  case ObjectKind::Jet: return "jet";
  case ObjectKind::BJet: return "bjet";
  case ObjectKind::MET: return "met";
  }
  return "?";
}

inline std::optional<ObjectKind> kind_from_string(std::string_view s) {
  for (auto k : kAllKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline bool is_lepton(ObjectKind k) { return k == ObjectKind::Electron || k == ObjectKind::Muon; }
inline bool is_jet(ObjectKind k) { return k == ObjectKind::Jet || k == ObjectKind::BJet; }

/// Rest mass assumed for a kind when the input does not carry one.
inline double default_mass(ObjectKind k) {
  switch (k) {
  case ObjectKind::Muon: return kMuonMass;
  case ObjectKind::Electron: return kElectronMass;
  default: return 0.0;
  }
}

struct FourVector {
  double e = 0, px = 0, py = 0, pz = 0;

  double p2() const { return px * px + py * py + pz * pz; }
  double p() const { return std::sqrt(p2()); }
  double m2() const { return e * e - p2(); }
  double pt() const { return std::hypot(px, py); }
  double eta() const { return std::asinh(pz / pt()); }
  double phi() const { return std::atan2(py, px); }
  /// E >= 0 and m^2 >= -kMassSquaredSlack.
  bool physical() const { return e >= 0 && m2() >= -kMassSquaredSlack; }

  bool operator==(const FourVector&) const = default;
};

struct PhysicsObject {
  ObjectKind kind = ObjectKind::Jet;
  double pt = 0;
  double eta = 0;
  double phi = 0;
  /// Rest mass in GeV/c^2; when absent the kind's default is used.
  std::optional<double> mass;
  /// b-tag discriminant, jets only.
  std::optional<double> btag;
  /// Upstream isolation/identification decision, passed through unchanged.
  bool quality = true;

  double rest_mass() const { return mass.value_or(default_mass(kind)); }

  bool operator==(const PhysicsObject&) const = default;
};

struct Event {
  std::string id;
  std::vector<PhysicsObject> objects;
  std::optional<PhysicsObject> met;
  std::optional<int> truth_class;

  bool operator==(const Event&) const = default;
};

/// Wrap an angle into [-pi, pi].
inline double wrap_phi(double phi) { return std::remainder(phi, 2 * kPi); }

inline FourVector four_vector_from_ptetaphi(double pt, double eta, double phi, double mass) {
  if (!(pt >= 0)) throw InvalidInput("four_vector_from_ptetaphi: pT must be >= 0");
  if (!(mass >= 0)) throw InvalidInput("four_vector_from_ptetaphi: mass must be >= 0");
  FourVector v;
  v.px = pt * std::cos(phi);
  v.py = pt * std::sin(phi);
  v.pz = pt * std::sinh(eta);
  v.e = std::sqrt(v.p2() + mass * mass);
  return v;
}

inline FourVector four_vector(const PhysicsObject& o) {
  return four_vector_from_ptetaphi(o.pt, o.eta, o.phi, o.rest_mass());
}

/// Two-body invariant mass from full four-vectors.
///
/// Evaluates m^2 = m1^2 + m2^2 + 2 (E1 E2 - p1.p2) with each piece arranged to
/// avoid cancellation: E^2 - |p|^2 is factored, E1 E2 - |p1||p2| is written as
/// a symmetric sum of (E - |p|) terms, and |p1||p2| - p1.p2 goes through the
/// cross product when the pair is close to collinear. The result is exactly
/// symmetric under argument swap. m^2 < 0 from rounding clamps to 0.
inline double invariant_mass_exact(const FourVector& a, const FourVector& b) {
  const double pa = a.p();
  const double pb = b.p();
  const double ma2 = (a.e - pa) * (a.e + pa);
  const double mb2 = (b.e - pb) * (b.e + pb);
  const double energy_term = 0.5 * ((a.e - pa) * (b.e + pb) + (a.e + pa) * (b.e - pb));
  const double dot = a.px * b.px + a.py * b.py + a.pz * b.pz;
  double angle_term; // |pa||pb| - pa.pb = |pa||pb| (1 - cos theta)
  if (dot > 0) {
    const double cx = a.py * b.pz - a.pz * b.py;
    const double cy = a.pz * b.px - a.px * b.pz;
    const double cz = a.px * b.py - a.py * b.px;
    angle_term = (cx * cx + cy * cy + cz * cz) / (pa * pb + dot);
  } else {
    angle_term = pa * pb - dot;
  }
  const double m2 = (ma2 + mb2) + 2 * (energy_term + angle_term);
  return std::sqrt(std::max(0.0, m2));
}

/// Massless two-body invariant mass in collider coordinates:
/// m^2 = 2 pT1 pT2 (cosh(d_eta) - cos(d_phi)), evaluated through the
/// half-angle identity 2 sinh^2(d_eta/2) + 2 sin^2(d_phi/2).
inline double invariant_mass_transverse(double pt1, double eta1, double phi1, double pt2,
                                        double eta2, double phi2) {
  const double sh = std::sinh(0.5 * (eta1 - eta2));
  const double sn = std::sin(0.5 * (phi1 - phi2));
  const double k = 2 * (sh * sh + sn * sn);
  const double m2 = 2 * (pt1 * pt2) * k;
  return std::sqrt(std::max(0.0, m2));
}

/// Two-body invariant mass straight from (pT, eta, phi, m), without going
/// through rounded four-vector components:
///   m^2 = m1^2 + m2^2 + 2 (E1 E2 - |p1||p2|) + 2 (|p1||p2| - p1.p2)
/// with E - |p| = m^2 / (E + |p|) and |p1||p2| - p1.p2 =
/// 2 pT1 pT2 (sinh^2(d_eta/2) + sin^2(d_phi/2)). Every term is >= 0.
inline double invariant_mass_ptetaphi(double pt1, double eta1, double phi1, double m1, double pt2,
                                      double eta2, double phi2, double m2) {
  if (!(pt1 >= 0) || !(pt2 >= 0)) throw InvalidInput("invariant mass: pT must be >= 0");
  if (!(m1 >= 0) || !(m2 >= 0)) throw InvalidInput("invariant mass: mass must be >= 0");
  const double p1 = pt1 * std::cosh(eta1), p2 = pt2 * std::cosh(eta2);
  const double e1 = std::hypot(p1, m1), e2 = std::hypot(p2, m2);
  const double d1 = e1 + p1 > 0 ? m1 * m1 / (e1 + p1) : 0.0; // E - |p|
  const double d2 = e2 + p2 > 0 ? m2 * m2 / (e2 + p2) : 0.0;
  const double energy_term = 0.5 * (d1 * (e2 + p2) + (e1 + p1) * d2);
  const double sh = std::sinh(0.5 * (eta1 - eta2));
  const double sn = std::sin(0.5 * (phi1 - phi2));
  const double angle_term = 2 * (pt1 * pt2) * (sh * sh + sn * sn);
  return std::sqrt((m1 * m1 + m2 * m2) + 2 * (energy_term + angle_term));
}

inline double invariant_mass(const PhysicsObject& a, const PhysicsObject& b) {
  return invariant_mass_ptetaphi(a.pt, a.eta, a.phi, a.rest_mass(), b.pt, b.eta, b.phi,
                                 b.rest_mass());
}

} // namespace evimg
