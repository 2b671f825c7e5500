#pragma once

// Event-to-image encoding. Every object becomes a one-pixel circumference on a
// fixed eta/phi canvas: centre from (eta, phi), radius C * ln(size), colour by
// object kind. Rendering is a pure function of (event, spec).

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "event_model.hpp"

namespace evimg {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

inline void to_json(nlohmann::json& j, const Rgb& c) { j = {c.r, c.g, c.b}; }
inline void from_json(const nlohmann::json& j, Rgb& c) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("colour must be [r, g, b]");
  c = {j[0].get<std::uint8_t>(), j[1].get<std::uint8_t>(), j[2].get<std::uint8_t>()};
}

enum class SizeVariable { Energy, TransverseMomentum };

NLOHMANN_JSON_SERIALIZE_ENUM(SizeVariable, {{SizeVariable::Energy, "energy"},
                                            {SizeVariable::TransverseMomentum, "pt"}})

/// Indexed by ObjectKind.
using ColorMap = std::array<Rgb, 5>;

inline ColorMap default_color_map() {
  ColorMap m{};
  m[static_cast<int>(ObjectKind::Electron)] = {0, 0, 255};
  m[static_cast<int>(ObjectKind::Muon)] = {0, 200, 0};
  m[static_cast<int>(ObjectKind::Jet)] = {255, 120, 120};
  m[static_cast<int>(ObjectKind::BJet)] = {150, 0, 0};
  m[static_cast<int>(ObjectKind::MET)] = {0, 0, 0};
  return m;
}

struct CanvasSpec {
  int width = 224;
  int height = 224;
  double scale_c = 10.5;
  double eta_min = -3.0;
  double eta_max = 3.0;
  double phi_min = -kPi;
  double phi_max = kPi;
  int min_radius = 1;
  ColorMap colors = default_color_map();
  Rgb background{255, 255, 255};
  SizeVariable size_variable = SizeVariable::TransverseMomentum;

  const Rgb& color(ObjectKind k) const { return colors[static_cast<int>(k)]; }

  void validate() const {
    if (width <= 0 || height <= 0) throw ConfigError("canvas: width and height must be > 0");
    if (!(scale_c > 0)) throw ConfigError("canvas: scale_c must be > 0");
    if (!(eta_max > eta_min) || !(phi_max > phi_min)) throw ConfigError("canvas: empty range");
    if (min_radius < 1) throw ConfigError("canvas: min_radius must be >= 1");
    for (auto k : kAllKinds)
      if (color(k) == background)
        throw ConfigError("canvas: colour for '" + std::string(to_string(k)) +
                          "' equals the background");
  }
};

inline void to_json(nlohmann::json& j, const CanvasSpec& s) {
  nlohmann::json colors;
  for (auto k : kAllKinds) colors[std::string(to_string(k))] = s.color(k);
  j = {{"width", s.width},
       {"height", s.height},
       {"scale_c", s.scale_c},
       {"eta_range", {s.eta_min, s.eta_max}},
       {"phi_range", {s.phi_min, s.phi_max}},
       {"min_radius", s.min_radius},
       {"colors", colors},
       {"background", s.background},
       {"size_variable", s.size_variable}};
}

inline void from_json(const nlohmann::json& j, CanvasSpec& s) {
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.scale_c = j.value("scale_c", s.scale_c);
  if (j.contains("eta_range")) {
    s.eta_min = j.at("eta_range").at(0).get<double>();
    s.eta_max = j.at("eta_range").at(1).get<double>();
  }
  if (j.contains("phi_range")) {
    s.phi_min = j.at("phi_range").at(0).get<double>();
    s.phi_max = j.at("phi_range").at(1).get<double>();
  }
  s.min_radius = j.value("min_radius", s.min_radius);
  if (j.contains("colors")) {
    for (const auto& [name, value] : j.at("colors").items()) {
      auto k = kind_from_string(name);
      if (!k) throw ConfigError("canvas: unknown colour key '" + name + "'");
      s.colors[static_cast<int>(*k)] = value.get<Rgb>();
    }
  }
  if (j.contains("background")) s.background = j.at("background").get<Rgb>();
  if (j.contains("size_variable")) s.size_variable = j.at("size_variable").get<SizeVariable>();
}

/// Row-major height x width x 3 raster of 8-bit channels.
class ImageTensor {
public:
  ImageTensor() = default;
  ImageTensor(int width, int height, Rgb fill = {255, 255, 255})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
    if (width <= 0 || height <= 0) throw InvalidInput("ImageTensor: dimensions must be > 0");
    for (std::size_t i = 0; i < data_.size(); i += 3) {
      data_[i] = fill.r;
      data_[i + 1] = fill.g;
      data_[i + 2] = fill.b;
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Rgb at(int x, int y) const {
    const auto i = index(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto i = index(x, y);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& data() { return data_; }

  bool operator==(const ImageTensor&) const = default;

private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
           3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

/// round(C * ln(value)), half away from zero, never below min_radius.
inline int radius_for(double value, const CanvasSpec& spec) {
  if (!(value > 0) || !std::isfinite(value))
    throw InvalidInput("radius_for: value must be finite and > 0");
  const double r = std::round(spec.scale_c * std::log(value));
  if (r < spec.min_radius) return spec.min_radius;
  return static_cast<int>(r);
}

/// Canvas cell for a direction. Out-of-range inputs clamp to the border;
/// x grows with eta, y grows with phi.
inline Pixel to_pixel(double eta, double phi, const CanvasSpec& spec) {
  auto cell = [](double v, double lo, double hi, int n) {
    const double f = std::floor((v - lo) * n / (hi - lo));
    if (!(f >= 0)) return 0; // also catches NaN
    if (f > n - 1) return n - 1;
    return static_cast<int>(f);
  };
  return {cell(eta, spec.eta_min, spec.eta_max, spec.width),
          cell(phi, spec.phi_min, spec.phi_max, spec.height)};
}

namespace detail {

inline long long isqrt_floor(long long n) {
  if (n < 0) return -1;
  auto r = static_cast<long long>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

} // namespace detail

/// Draw a one-pixel circumference: every in-canvas pixel whose rounded
/// distance from the centre equals the radius gets the colour.
///
/// round(d) == r  <=>  (2r - 1)^2 <= 4 d^2 < (2r + 1)^2, so each row reduces to
/// at most two integer spans of dx, found with integer square roots.
inline void rasterize_circle(ImageTensor& canvas, Pixel center, int radius, Rgb color) {
  if (radius < 1) throw InvalidInput("rasterize_circle: radius must be >= 1");
  const long long r = radius;
  const long long inner = (2 * r - 1) * (2 * r - 1);
  const long long outer = (2 * r + 1) * (2 * r + 1);
  const int y_lo = std::max(0, center.y - radius);
  const int y_hi = std::min(canvas.height() - 1, center.y + radius);
  for (int y = y_lo; y <= y_hi; ++y) {
    const long long dy = y - center.y;
    // 4 dx^2 < outer - 4 dy^2  and  4 dx^2 >= inner - 4 dy^2
    const long long max_dx = detail::isqrt_floor((outer - 4 * dy * dy - 1) / 4);
    if (max_dx < 0) continue;
    const long long need = inner - 4 * dy * dy; // 4 dx^2 >= need
    long long min_dx = 0;
    if (need > 0) {
      const long long q = (need + 3) / 4; // dx^2 >= ceil(need / 4)
      min_dx = detail::isqrt_floor(q - 1) + 1;
    }
    for (long long dx = min_dx; dx <= max_dx; ++dx) {
      for (long long sx : {dx, -dx}) {
        const long long x = center.x + sx;
        if (x >= 0 && x < canvas.width()) canvas.set(static_cast<int>(x), y, color);
        if (dx == 0) break;
      }
    }
  }
}

struct RenderStats {
  std::size_t drawn = 0;
  /// Objects skipped because their size variable was not positive.
  std::size_t skipped = 0;
};

/// Overwrite order on overlap: MET, jets, b-jets, electrons, muons.
inline int draw_layer(ObjectKind k) {
  switch (k) {
  case ObjectKind::MET: return 0;
  case ObjectKind::Jet: return 1;
  case ObjectKind::BJet: return 2;
  case ObjectKind::Electron: return 3;
  case ObjectKind::Muon: return 4;
  }
  return 0;
}

/// Size variable of one object: energy or pT, and |MET| for MET in both modes.
inline double size_value(const PhysicsObject& o, SizeVariable v) {
  if (o.kind == ObjectKind::MET || v == SizeVariable::TransverseMomentum) return o.pt;
  if (!(o.pt >= 0)) return o.pt;
  return four_vector(o).e;
}

inline ImageTensor render_event(const Event& ev, const CanvasSpec& spec,
                                RenderStats* stats = nullptr) {
  ImageTensor img(spec.width, spec.height, spec.background);
  std::vector<const PhysicsObject*> layers[5];
  if (ev.met) layers[0].push_back(&*ev.met);
  for (const auto& o : ev.objects) layers[draw_layer(o.kind)].push_back(&o);
  RenderStats local;
  for (const auto& layer : layers) {
    for (const PhysicsObject* o : layer) {
      const double value = size_value(*o, spec.size_variable);
      if (!(value > 0) || !std::isfinite(value)) {
        ++local.skipped;
        continue;
      }
      const double eta = o->kind == ObjectKind::MET ? 0.0 : o->eta;
      rasterize_circle(img, to_pixel(eta, o->phi, spec), radius_for(value, spec), spec.color(o->kind));
      ++local.drawn;
    }
  }
  if (stats) *stats = local;
  return img;
}

} // namespace evimg
