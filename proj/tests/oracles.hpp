#pragma once

// Independent reference computations used by the tests. None of these call
// into the library's numerical code.

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <vector>

#include "evimg/event_model.hpp"
#include "evimg/render.hpp"
#include "evimg/selection.hpp"

namespace oracle {

using Big = boost::multiprecision::cpp_bin_float_50;

/// (E1 + E2)^2 - |p1 + p2|^2 in 50 decimal digits.
inline double pair_mass(double pt1, double eta1, double phi1, double m1, double pt2, double eta2,
                        double phi2, double m2) {
  auto comp = [](double pt, double eta, double phi, double m, Big& e, Big& px, Big& py, Big& pz) {
    const Big bpt(pt), beta(eta), bphi(phi), bm(m);
    px = bpt * cos(bphi);
    py = bpt * sin(bphi);
    pz = bpt * sinh(beta);
    e = sqrt(px * px + py * py + pz * pz + bm * bm);
  };
  Big e1, x1, y1, z1, e2, x2, y2, z2;
  comp(pt1, eta1, phi1, m1, e1, x1, y1, z1);
  comp(pt2, eta2, phi2, m2, e2, x2, y2, z2);
  const Big e = e1 + e2, x = x1 + x2, y = y1 + y2, z = z1 + z2;
  Big s = e * e - x * x - y * y - z * z;
  if (s < 0) s = 0;
  return static_cast<double>(sqrt(s));
}

/// Per-pixel scan: a pixel is on the circle when its Euclidean distance to the
/// centre rounds to the radius.
inline std::vector<int> circle_mask(int width, int height, int cx, int cy, int radius) {
  std::vector<int> mask(static_cast<std::size_t>(width) * height, 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const long double d = std::sqrt(static_cast<long double>((x - cx) * (x - cx) + (y - cy) * (y - cy)));
      if (std::floor(d + 0.5L) == radius) mask[static_cast<std::size_t>(y) * width + x] = 1;
    }
  return mask;
}

/// Slow reference renderer: every object tests every pixel.
inline evimg::ImageTensor render(const evimg::Event& ev, const evimg::CanvasSpec& spec) {
  using evimg::ObjectKind;
  evimg::ImageTensor img(spec.width, spec.height, spec.background);
  const ObjectKind order[] = {ObjectKind::MET, ObjectKind::Jet, ObjectKind::BJet,
                              ObjectKind::Electron, ObjectKind::Muon};
  std::vector<evimg::PhysicsObject> all = ev.objects;
  if (ev.met) all.insert(all.begin(), *ev.met);
  for (ObjectKind kind : order) {
    for (const auto& o : all) {
      if (o.kind != kind) continue;
      long double v = o.pt;
      if (kind != ObjectKind::MET && spec.size_variable == evimg::SizeVariable::Energy) {
        const long double m = o.mass.value_or(evimg::default_mass(kind));
        const long double p = o.pt * std::cosh(static_cast<long double>(o.eta));
        v = std::sqrt(p * p + m * m);
      }
      if (!(v > 0)) continue;
      const long double raw = spec.scale_c * std::log(v);
      int r = static_cast<int>(raw < 0 ? -std::floor(-raw + 0.5L) : std::floor(raw + 0.5L));
      if (r < spec.min_radius) r = spec.min_radius;
      const long double eta = kind == ObjectKind::MET ? 0.0L : o.eta;
      auto cell = [](long double val, long double lo, long double hi, int n) {
        long double f = std::floor((val - lo) * n / (hi - lo));
        if (f < 0) f = 0;
        if (f > n - 1) f = n - 1;
        return static_cast<int>(f);
      };
      const int cx = cell(eta, spec.eta_min, spec.eta_max, spec.width);
      const int cy = cell(o.phi, spec.phi_min, spec.phi_max, spec.height);
      const auto mask = circle_mask(spec.width, spec.height, cx, cy, r);
      for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
          if (mask[static_cast<std::size_t>(y) * spec.width + x]) img.set(x, y, spec.color(kind));
    }
  }
  return img;
}

/// Linear scan over the windows, no sorting or searching.
inline int window_scan(double mass, const std::vector<evimg::MassWindow>& windows) {
  for (const auto& w : windows)
    if (mass >= w.lo && mass <= w.hi) return w.class_id;
  return 0;
}

} // namespace oracle
