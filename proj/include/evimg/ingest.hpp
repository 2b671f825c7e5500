#pragma once

// Newline-delimited JSON event files.
//
//   {"format_version": "1.0", "source": "...", "class_names": ["None", "JPsi", ...]}
//   {"id": "e1", "objects": [{"kind": "muon", "pt": 30, "eta": 0.5, "phi": 0.1}], "met": {"pt": 12, "phi": -1.2}, "class": 1}
//   ...
//
// The first non-blank line is the header. Every further line is one event.
// EventReader holds one line at a time, so memory is bounded by the largest
// record rather than the file.

#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "event_model.hpp"

namespace evimg {

inline constexpr const char* kFormatVersion = "1.0";

struct EventFileHeader {
  std::string format_version = kFormatVersion;
  std::string source;
  std::vector<std::string> class_names;

  bool operator==(const EventFileHeader&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;

  std::string to_string() const { return field + ": " + rule; }
  bool operator==(const Violation&) const = default;
};

/// Check every type invariant of an event. Empty result means valid.
inline std::vector<Violation> validate_event(const Event& ev) {
  std::vector<Violation> out;
  auto check_object = [&](const PhysicsObject& o, const std::string& where) {
    if (!std::isfinite(o.pt) || !std::isfinite(o.eta) || !std::isfinite(o.phi))
      out.push_back({where, "finite kinematics"});
    if (!(o.pt >= 0)) out.push_back({where + ".pt", "pT >= 0"});
    if (!(o.phi >= -kPi && o.phi <= kPi)) out.push_back({where + ".phi", "phi in [-pi, pi]"});
    if (o.mass && !(*o.mass >= 0)) out.push_back({where + ".mass", "mass >= 0"});
    if (o.btag) {
      if (!is_jet(o.kind))
        out.push_back({where + ".btag", "btag only on jets"});
      else if (!(*o.btag >= 0 && *o.btag <= 1))
        out.push_back({where + ".btag", "btag in [0, 1]"});
    }
  };
  if (ev.id.empty()) out.push_back({"id", "non-empty"});
  int met_count = ev.met ? 1 : 0;
  for (std::size_t i = 0; i < ev.objects.size(); ++i) {
    const auto& o = ev.objects[i];
    check_object(o, "objects[" + std::to_string(i) + "]");
    if (o.kind == ObjectKind::MET) ++met_count;
  }
  if (ev.met) {
    if (ev.met->kind != ObjectKind::MET) out.push_back({"met.kind", "kind is MET"});
    check_object(*ev.met, "met");
  }
  if (met_count > 1) out.push_back({"met", "duplicate MET"});
  if (ev.truth_class && *ev.truth_class < 0) out.push_back({"class", "class >= 0"});
  return out;
}

namespace detail {

inline double finite_number(const nlohmann::json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw std::runtime_error(where + ": missing field '" + key + "'");
  if (!it->is_number()) throw std::runtime_error(where + "." + key + ": not a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw std::runtime_error(where + "." + key + ": non-finite value");
  return v;
}

inline std::optional<double> optional_number(const nlohmann::json& j, const char* key,
                                             const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return finite_number(j, key, where);
}

template <std::size_t N>
std::size_t count_unknown(const nlohmann::json& j, const std::array<const char*, N>& known) {
  std::size_t n = 0;
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) ++n;
  }
  return n;
}

inline PhysicsObject object_from_json(const nlohmann::json& j, const std::string& where,
                                      std::size_t& unknown_fields,
                                      std::optional<ObjectKind> forced_kind = std::nullopt) {
  if (!j.is_object()) throw std::runtime_error(where + ": expected an object");
  PhysicsObject o;
  if (forced_kind) {
    o.kind = *forced_kind;
  } else {
    auto it = j.find("kind");
    if (it == j.end() || !it->is_string())
      throw std::runtime_error(where + ": missing string field 'kind'");
    auto k = kind_from_string(it->get<std::string>());
    if (!k) throw std::runtime_error(where + ": unknown object kind '" + it->get<std::string>() + "'");
    o.kind = *k;
  }
  o.pt = finite_number(j, "pt", where);
  o.phi = finite_number(j, "phi", where);
  if (o.kind == ObjectKind::MET)
    o.eta = optional_number(j, "eta", where).value_or(0.0);
  else
    o.eta = finite_number(j, "eta", where);
  o.mass = optional_number(j, "mass", where);
  o.btag = optional_number(j, "btag", where);
  if (j.contains("quality")) {
    if (!j.at("quality").is_boolean()) throw std::runtime_error(where + ".quality: not a boolean");
    o.quality = j.at("quality").get<bool>();
  }
  static constexpr std::array<const char*, 7> known = {"kind", "pt",   "eta",    "phi",
                                                       "mass", "btag", "quality"};
  unknown_fields += count_unknown(j, known);
  return o;
}

inline nlohmann::json object_to_json(const PhysicsObject& o, bool as_met) {
  nlohmann::json j;
  if (!as_met) j["kind"] = std::string(to_string(o.kind));
  j["pt"] = o.pt;
  if (!as_met || o.eta != 0.0) j["eta"] = o.eta;
  j["phi"] = o.phi;
  if (o.mass) j["mass"] = *o.mass;
  if (o.btag) j["btag"] = *o.btag;
  if (!o.quality) j["quality"] = false;
  return j;
}

} // namespace detail

/// Decode one event record. Throws std::runtime_error describing the problem;
/// EventReader wraps that into a ParseError with the position.
inline Event event_from_json(const nlohmann::json& j, std::size_t* unknown_fields = nullptr) {
  std::size_t unknown = 0;
  if (!j.is_object()) throw std::runtime_error("event record is not a JSON object");
  Event ev;
  auto id = j.find("id");
  if (id == j.end()) throw std::runtime_error("missing field 'id'");
  if (id->is_string())
    ev.id = id->get<std::string>();
  else if (id->is_number_integer())
    ev.id = id->dump();
  else
    throw std::runtime_error("'id' must be a string or an integer");

  auto objs = j.find("objects");
  if (objs != j.end()) {
    if (!objs->is_array()) throw std::runtime_error("'objects' must be an array");
    for (std::size_t i = 0; i < objs->size(); ++i)
      ev.objects.push_back(
          detail::object_from_json((*objs)[i], "objects[" + std::to_string(i) + "]", unknown));
  }
  auto met = j.find("met");
  if (met != j.end() && !met->is_null())
    ev.met = detail::object_from_json(*met, "met", unknown, ObjectKind::MET);
  auto cls = j.find("class");
  if (cls != j.end() && !cls->is_null()) {
    if (!cls->is_number_integer()) throw std::runtime_error("'class' must be an integer");
    ev.truth_class = cls->get<int>();
  }
  static constexpr std::array<const char*, 4> known = {"id", "objects", "met", "class"};
  unknown += detail::count_unknown(j, known);
  if (unknown_fields) *unknown_fields += unknown;
  return ev;
}

inline nlohmann::json event_to_json(const Event& ev) {
  nlohmann::json j;
  j["id"] = ev.id;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : ev.objects) j["objects"].push_back(detail::object_to_json(o, false));
  if (ev.met) j["met"] = detail::object_to_json(*ev.met, true);
  if (ev.truth_class) j["class"] = *ev.truth_class;
  return j;
}

inline nlohmann::json header_to_json(const EventFileHeader& h) {
  return {{"format_version", h.format_version},
          {"source", h.source},
          {"class_names", h.class_names}};
}

/// Serialize a header line followed by one line per event.
class EventWriter {
public:
  EventWriter(std::ostream& out, const EventFileHeader& header) : out_(out) {
    out_ << header_to_json(header).dump() << '\n';
  }
  void write(const Event& ev) { out_ << event_to_json(ev).dump() << '\n'; }

private:
  std::ostream& out_;
};

/// Single-pass reader over an NDJSON event stream.
///
/// next() returns the following event, std::nullopt at end of input, or throws
/// ParseError for a bad record. After a ParseError the reader is positioned on
/// the next line, so callers may count the rejection and keep going.
class EventReader {
public:
  explicit EventReader(std::istream& in) : in_(in) { read_header(); }

  const EventFileHeader& header() const { return header_; }

  std::optional<Event> next() {
    std::string line;
    while (read_line(line)) {
      if (is_blank(line)) continue;
      const std::size_t index = events_seen_++;
      try {
        auto j = nlohmann::json::parse(line);
        Event ev = event_from_json(j, &unknown_fields_);
        auto violations = validate_event(ev);
        if (!violations.empty()) throw std::runtime_error(violations.front().to_string());
        if (ev.truth_class) {
          if (header_.class_names.empty())
            throw std::runtime_error("class label present but header has no class_names");
          if (*ev.truth_class >= static_cast<int>(header_.class_names.size()))
            throw std::runtime_error("class " + std::to_string(*ev.truth_class) +
                                     " outside header class_names");
        }
        return ev;
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception& e) {
        throw ParseError(e.what(), line_offset_, line_no_, index);
      }
    }
    return std::nullopt;
  }

  /// Count of fields ignored because they are not part of the schema.
  std::size_t unknown_field_warnings() const { return unknown_fields_; }
  std::size_t events_seen() const { return events_seen_; }
  /// Length of the longest line read so far, in bytes.
  std::size_t max_line_bytes() const { return max_line_; }

private:
  static bool is_blank(const std::string& s) {
    return s.find_first_not_of(" \t\r") == std::string::npos;
  }

  bool read_line(std::string& line) {
    if (!std::getline(in_, line)) return false;
    line_offset_ = offset_;
    offset_ += line.size() + 1;
    ++line_no_;
    if (line.size() > max_line_) max_line_ = line.size();
    return true;
  }

  void read_header() {
    std::string line;
    while (read_line(line)) {
      if (is_blank(line)) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const std::exception& e) {
        throw ParseError(std::string("header: ") + e.what(), line_offset_, line_no_, 0);
      }
      if (!j.is_object() || !j.contains("format_version"))
        throw ParseError("first record must be a header with 'format_version'", line_offset_,
                         line_no_, 0);
      try {
        header_.format_version = j.at("format_version").get<std::string>();
        header_.source = j.value("source", std::string{});
        header_.class_names = j.value("class_names", std::vector<std::string>{});
      } catch (const std::exception& e) {
        throw ParseError(std::string("header: ") + e.what(), line_offset_, line_no_, 0);
      }
      if (header_.format_version != kFormatVersion && header_.format_version != "1")
        throw ParseError("unsupported format_version '" + header_.format_version + "'",
                         line_offset_, line_no_, 0);
      return;
    }
    // Empty input: no header, no events.
  }

  std::istream& in_;
  EventFileHeader header_;
  std::size_t offset_ = 0;
  std::size_t line_offset_ = 0;
  std::size_t line_no_ = 0;
  std::size_t events_seen_ = 0;
  std::size_t unknown_fields_ = 0;
  std::size_t max_line_ = 0;
};

/// Read every event; throws on the first bad record.
inline std::vector<Event> read_all_events(std::istream& in, EventFileHeader* header = nullptr) {
  EventReader reader(in);
  if (header) *header = reader.header();
  std::vector<Event> out;
  while (auto ev = reader.next()) out.push_back(std::move(*ev));
  return out;
}

struct ValidationReport {
  std::size_t parsed = 0;
  std::size_t rejected = 0;
  std::size_t unknown_field_warnings = 0;
  std::size_t duplicate_ids = 0;
  std::vector<std::string> first_violations; // at most 10

  nlohmann::json to_json() const {
    return {{"parsed", parsed},
            {"rejected", rejected},
            {"unknown_field_warnings", unknown_field_warnings},
            {"duplicate_ids", duplicate_ids},
            {"first_violations", first_violations}};
  }
};

} // namespace evimg
