#pragma once

// Pipeline configuration and the stage functions behind the command line:
// load and label a corpus, build the manifest, render, train the baseline,
// evaluate and report. Every artifact of a run lives under one run directory:
//
//   <run>/config.resolved.json
//   <run>/dataset/manifest.json, <run>/dataset/<split>/<class>/*.png
//   <run>/render_summary.json
//   <run>/model.json, <run>/history.csv, <run>/history.png
//   <run>/predictions.csv, confusion*.csv, confusion*.png, metrics.json

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "baseline_nn.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "ingest.hpp"
#include "metrics.hpp"
#include "png.hpp"
#include "random.hpp"
#include "render.hpp"
#include "selection.hpp"
#include "synth.hpp"

namespace evimg {

enum class PipelineMode { Dimuon, Complex };

NLOHMANN_JSON_SERIALIZE_ENUM(PipelineMode, {{PipelineMode::Dimuon, "dimuon"},
                                            {PipelineMode::Complex, "complex"}})

inline PipelineMode mode_from_string(const std::string& s) {
  if (s == "dimuon") return PipelineMode::Dimuon;
  if (s == "complex") return PipelineMode::Complex;
  throw ConfigError("unknown mode '" + s + "' (expected dimuon or complex)");
}

struct PipelineConfig {
  PipelineMode mode = PipelineMode::Dimuon;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  CanvasSpec canvas;
  SelectionConfig selection;
  std::vector<MassWindow> windows = default_dimuon_windows();
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  /// When both are set, val/test take these fixed counts per class instead of ratios.
  std::optional<std::size_t> val_per_class;
  std::optional<std::size_t> test_per_class;
  bool balance = true;
  /// Per class name; classes not listed (or an empty map) go to the max count.
  std::map<std::string, std::size_t> balance_targets;
  MlpConfig mlp;
  FeatureSpec features;
  int signal_class = 0;

  /// Mode-dependent defaults: dimuon images are sized by energy and use the
  /// two-muon feature layout, complex events by pT with the full layout.
  static PipelineConfig for_mode(PipelineMode m) {
    PipelineConfig c;
    c.mode = m;
    c.canvas.size_variable =
        m == PipelineMode::Dimuon ? SizeVariable::Energy : SizeVariable::TransverseMomentum;
    c.features.layout = m == PipelineMode::Dimuon ? FeatureLayout::Dimuon : FeatureLayout::Complex;
    return c;
  }

  std::uint64_t stage_seed(std::string_view stage) const {
    return derive_seed(seed, std::string("pipeline.") + std::string(stage));
  }

  void validate() const {
    canvas.validate();
    selection.validate();
    MassWindowTable check(windows);
    if (threads == 0) throw ConfigError("threads must be >= 1");
    if (val_per_class.has_value() != test_per_class.has_value())
      throw ConfigError("val_per_class and test_per_class must be given together");
    if (features.max_jets < 0) throw ConfigError("features: max_jets must be >= 0");
    if (signal_class < 0) throw ConfigError("signal_class must be >= 0");
  }
};

inline nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["mode"] = c.mode;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["canvas"] = c.canvas;
  j["selection"] = c.selection;
  j["windows"] = c.windows;
  j["split"] = {{"ratios", c.ratios}};
  if (c.val_per_class) j["split"]["val_per_class"] = *c.val_per_class;
  if (c.test_per_class) j["split"]["test_per_class"] = *c.test_per_class;
  j["balance"] = {{"enabled", c.balance}, {"targets", c.balance_targets}};
  j["mlp"] = c.mlp;
  j["features"] = c.features;
  j["signal_class"] = c.signal_class;
  return j;
}

/// Overlay a JSON config on the defaults for its mode. `mode_override`
/// (a command-line flag) wins over the file's "mode".
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                                std::optional<PipelineMode> mode_override = {}) {
  static const std::array<const char*, 12> known = {
      "mode",    "seed",  "threads", "canvas",   "selection", "windows",
      "split",   "balance", "mlp",   "features", "signal_class", "comment"};
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) ==
        known.end())
      throw ConfigError("config: unknown key '" + key + "'");
  try {
    PipelineMode mode = PipelineMode::Dimuon;
    if (j.contains("mode")) mode = mode_from_string(j.at("mode").get<std::string>());
    if (mode_override) mode = *mode_override;
    PipelineConfig c = PipelineConfig::for_mode(mode);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("canvas")) {
      auto size_var = c.canvas.size_variable;
      from_json(j.at("canvas"), c.canvas);
      if (!j.at("canvas").contains("size_variable")) c.canvas.size_variable = size_var;
    }
    if (j.contains("selection")) c.selection = j.at("selection").get<SelectionConfig>();
    if (j.contains("windows")) c.windows = j.at("windows").get<std::vector<MassWindow>>();
    if (j.contains("split")) {
      const auto& s = j.at("split");
      if (s.contains("ratios")) c.ratios = s.at("ratios").get<std::array<double, 3>>();
      if (s.contains("val_per_class")) c.val_per_class = s.at("val_per_class").get<std::size_t>();
      if (s.contains("test_per_class")) c.test_per_class = s.at("test_per_class").get<std::size_t>();
    }
    if (j.contains("balance")) {
      const auto& b = j.at("balance");
      c.balance = b.value("enabled", c.balance);
      if (b.contains("targets"))
        c.balance_targets = b.at("targets").get<std::map<std::string, std::size_t>>();
    }
    if (j.contains("mlp")) c.mlp = j.at("mlp").get<MlpConfig>();
    if (j.contains("features")) {
      const auto layout = c.features.layout;
      c.features = j.at("features").get<FeatureSpec>();
      if (!j.at("features").contains("layout")) c.features.layout = layout;
    }
    c.signal_class = j.value("signal_class", c.signal_class);
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path,
                                           std::optional<PipelineMode> mode_override = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return pipeline_config_from_json(j, mode_override);
}

// ---------------------------------------------------------------------------
// Corpus

/// Selected, labelled events keyed by id.
struct Corpus {
  std::vector<std::string> class_names;
  std::vector<Event> events;
  std::map<std::string, std::size_t> index;
  std::size_t dropped = 0; // failed selection (or not a dimuon event)

  const Event& at(const std::string& id) const {
    auto it = index.find(id);
    if (it == index.end()) throw InvalidInput("unknown event id '" + id + "'");
    return events[it->second];
  }

  std::vector<LabelledId> labels() const {
    std::vector<LabelledId> out;
    out.reserve(events.size());
    for (const auto& ev : events) out.push_back({ev.id, *ev.truth_class});
    return out;
  }
};

/// Dimuon mode keeps the two leading muons and labels the event by their
/// pair mass; the file's own labels are ignored. Complex mode applies the
/// selection and requires a label on every event.
inline Corpus prepare_corpus(std::vector<Event> events, const EventFileHeader& header,
                             const PipelineConfig& cfg) {
  Corpus c;
  if (cfg.mode == PipelineMode::Dimuon) {
    c.class_names = dimuon_class_names();
    const MassWindowTable table(cfg.windows);
    for (const auto& w : table.windows()) {
      if (w.class_id >= static_cast<int>(c.class_names.size()))
        c.class_names.resize(static_cast<std::size_t>(w.class_id) + 1);
      c.class_names[static_cast<std::size_t>(w.class_id)] = w.name;
    }
    for (auto& ev : events) {
      std::vector<PhysicsObject> muons;
      for (const auto& o : ev.objects)
        if (o.kind == ObjectKind::Muon) muons.push_back(o);
      if (muons.size() < 2) {
        ++c.dropped;
        continue;
      }
      std::stable_sort(muons.begin(), muons.end(),
                       [](const PhysicsObject& a, const PhysicsObject& b) { return a.pt > b.pt; });
      muons.resize(2);
      Event kept;
      kept.id = ev.id;
      kept.objects = muons;
      kept.truth_class = classify_dimuon(invariant_mass(muons[0], muons[1]), table);
      c.events.push_back(std::move(kept));
    }
  } else {
    c.class_names = header.class_names.empty() ? complex_class_names() : header.class_names;
    for (auto& ev : events) {
      if (!ev.truth_class) throw InvalidInput("event '" + ev.id + "' has no class label");
      auto sel = select_complex_event(ev, cfg.selection);
      if (!sel) {
        ++c.dropped;
        continue;
      }
      if (*sel->truth_class >= static_cast<int>(c.class_names.size()))
        c.class_names.resize(static_cast<std::size_t>(*sel->truth_class) + 1);
      c.events.push_back(std::move(*sel));
    }
  }
  for (std::size_t i = 0; i < c.class_names.size(); ++i)
    if (c.class_names[i].empty()) c.class_names[i] = "class" + std::to_string(i);
  for (std::size_t i = 0; i < c.events.size(); ++i)
    if (!c.index.emplace(c.events[i].id, i).second)
      throw InvalidInput("duplicate event id '" + c.events[i].id + "'");
  return c;
}

inline Corpus load_corpus(const std::filesystem::path& path, const PipelineConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  EventFileHeader header;
  auto events = read_all_events(in, &header);
  return prepare_corpus(std::move(events), header, cfg);
}

// ---------------------------------------------------------------------------
// Manifest

inline DatasetManifest build_manifest(const Corpus& corpus, const PipelineConfig& cfg) {
  const auto seed = cfg.stage_seed("split");
  DatasetManifest m =
      cfg.val_per_class
          ? split_fixed(corpus.labels(), *cfg.val_per_class, *cfg.test_per_class, seed,
                        corpus.class_names)
          : split(corpus.labels(), cfg.ratios, seed, corpus.class_names);
  if (cfg.balance) {
    std::map<int, std::size_t> targets;
    if (!cfg.balance_targets.empty()) {
      targets = max_count_targets(m.counts(Split::Train));
      for (const auto& [name, n] : cfg.balance_targets) {
        auto it = std::find(m.class_names.begin(), m.class_names.end(), name);
        if (it == m.class_names.end())
          throw ConfigError("balance target for unknown class '" + name + "'");
        targets[static_cast<int>(it - m.class_names.begin())] = n;
      }
    }
    balance_manifest(m, targets);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Features and training

struct FeatureTable {
  std::vector<std::string> ids;
  LabelledSet<float> set;
  std::size_t truncated_jets = 0;
};

inline FeatureTable feature_table(const Corpus& corpus, const std::vector<ManifestEntry>& entries,
                                  const FeatureSpec& spec) {
  FeatureTable t;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  FeaturizeStats stats;
  rows.reserve(entries.size());
  for (const auto& e : entries) {
    rows.push_back(featurize(corpus.at(e.event_id), spec, &stats));
    labels.push_back(e.class_id);
    t.ids.push_back(e.event_id);
  }
  t.set = make_set<float>(rows, labels);
  if (entries.empty()) t.set.x.resize(0, static_cast<Eigen::Index>(spec.length()));
  t.truncated_jets = stats.truncated_jets;
  return t;
}

/// MlpConfig with the widths and seed the corpus and global seed imply.
inline MlpConfig resolved_mlp_config(const PipelineConfig& cfg, std::size_t n_classes) {
  MlpConfig m = cfg.mlp;
  m.input_dim = static_cast<int>(cfg.features.length());
  m.n_classes = static_cast<int>(n_classes);
  m.seed = cfg.stage_seed("mlp");
  return m;
}

inline TrainResult<float> train_ffn(const Corpus& corpus, const DatasetManifest& manifest,
                                    const PipelineConfig& cfg,
                                    const std::function<bool(const EpochStats&)>& on_epoch = {}) {
  const auto tr = feature_table(corpus, manifest.entries(Split::Train), cfg.features);
  const auto va = feature_table(corpus, manifest.entries(Split::Val), cfg.features);
  return train(tr.set, va.set, resolved_mlp_config(cfg, manifest.class_names.size()), on_epoch);
}

// ---------------------------------------------------------------------------
// Predictions

struct PredictionRow {
  std::string event_id;
  int pred = 0;
  std::vector<double> probs;

  bool operator==(const PredictionRow&) const = default;
};

inline std::vector<PredictionRow> predict_rows(const Mlp<float>& model, const FeatureTable& table) {
  std::vector<PredictionRow> out;
  if (table.ids.empty()) return out;
  const auto probs = predict_proba(model, table.set.x);
  const auto preds = argmax_rows<float>(probs);
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    PredictionRow r{table.ids[i], preds[i], {}};
    for (Eigen::Index c = 0; c < probs.cols(); ++c)
      r.probs.push_back(static_cast<double>(probs(static_cast<Eigen::Index>(i), c)));
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (quoted) throw InvalidInput("unterminated quote");
  out.push_back(std::move(cur));
  return out;
}

} // namespace detail

/// event_id,pred,prob_<class>... with probabilities at 9 significant digits.
inline std::string predictions_csv(const std::vector<PredictionRow>& rows,
                                   const std::vector<std::string>& class_names) {
  std::string out = "event_id,pred";
  for (const auto& n : class_names) out += "," + detail::csv_field("prob_" + n);
  out += '\n';
  char buf[32];
  for (const auto& r : rows) {
    out += detail::csv_field(r.event_id) + "," + std::to_string(r.pred);
    for (double p : r.probs) {
      std::snprintf(buf, sizeof buf, "%.9g", p);
      out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

/// Reads the predictions format above. Any producer works as long as the
/// first two columns are event_id and pred; the rest are probabilities.
inline std::vector<PredictionRow> read_predictions_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<PredictionRow> rows;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      auto fields = detail::split_csv_line(line);
      if (width == 0) {
        if (fields.size() < 2 || fields[0] != "event_id" || fields[1] != "pred")
          throw InvalidInput("header must start with event_id,pred");
        width = fields.size();
        continue;
      }
      if (fields.size() != width) throw InvalidInput("expected " + std::to_string(width) + " fields");
      PredictionRow r;
      r.event_id = fields[0];
      std::size_t used = 0;
      r.pred = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw InvalidInput("bad pred '" + fields[1] + "'");
      for (std::size_t i = 2; i < fields.size(); ++i) r.probs.push_back(std::stod(fields[i]));
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw InvalidInput("predictions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (width == 0) throw InvalidInput("predictions: missing header");
  return rows;
}

// ---------------------------------------------------------------------------
// Report

struct Report {
  ConfusionMatrix matrix;
  std::vector<std::string> class_names;
  int signal_class = 0;
  std::optional<double> efficiency; // unset when signal or background is empty
  std::size_t missing_predictions = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["samples"] = matrix.total();
    j["accuracy"] = matrix.accuracy();
    j["signal_class"] = signal_class;
    j["signal_name"] =
        signal_class < static_cast<int>(class_names.size()) ? class_names[signal_class] : "";
    j["efficiency"] = efficiency ? nlohmann::json(*efficiency) : nlohmann::json(nullptr);
    j["efficiency_definition"] = kEfficiencyDefinition;
    j["missing_predictions"] = missing_predictions;
    return j;
  }
};

/// Join predictions with the labels of one manifest split.
inline Report make_report(const std::vector<PredictionRow>& rows, const DatasetManifest& manifest,
                          Split split, int signal_class) {
  const int n = static_cast<int>(manifest.class_names.size());
  std::map<std::string, int> truth;
  for (const auto& e : manifest.entries(split))
    if (e.replication_index == 0) truth[e.event_id] = e.class_id;
  Report rep;
  rep.matrix = ConfusionMatrix(n);
  rep.class_names = manifest.class_names;
  rep.signal_class = signal_class;
  std::set<std::string> seen;
  for (const auto& r : rows) {
    auto it = truth.find(r.event_id);
    if (it == truth.end())
      throw InvalidInput("prediction for '" + r.event_id + "' which is not in the " +
                         to_string(split) + " split");
    if (!seen.insert(r.event_id).second)
      throw InvalidInput("duplicate prediction for '" + r.event_id + "'");
    if (r.pred < 0 || r.pred >= n)
      throw InvalidInput("prediction for '" + r.event_id + "' has class " + std::to_string(r.pred) +
                         " outside 0.." + std::to_string(n - 1));
    ++rep.matrix(it->second, r.pred);
  }
  rep.missing_predictions = truth.size() - seen.size();
  if (signal_class < 0 || signal_class >= n) throw ConfigError("signal class out of range");
  try {
    rep.efficiency = signal_background_efficiency(rep.matrix, signal_class);
  } catch (const InvalidInput&) {
    rep.efficiency.reset();
  }
  return rep;
}

inline std::string format_report(const Report& rep) {
  std::ostringstream out;
  out << confusion_csv(rep.matrix, rep.class_names);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", rep.matrix.accuracy());
  out << "samples: " << rep.matrix.total() << "\naccuracy: " << buf << '\n';
  const std::string signal = rep.signal_class < static_cast<int>(rep.class_names.size())
                                 ? rep.class_names[rep.signal_class]
                                 : std::to_string(rep.signal_class);
  if (rep.efficiency) {
    std::snprintf(buf, sizeof buf, "%.6f", *rep.efficiency);
    out << "efficiency (signal " << signal << "): " << buf << '\n';
  } else {
    out << "efficiency (signal " << signal << "): undefined, empty signal or background\n";
  }
  out << "efficiency definition: " << kEfficiencyDefinition << '\n';
  if (rep.missing_predictions)
    out << "missing predictions: " << rep.missing_predictions << '\n';
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_report_files(const std::filesystem::path& dir, const Report& rep) {
  std::filesystem::create_directories(dir);
  write_text(dir / "confusion.csv", confusion_csv(rep.matrix, rep.class_names));
  write_text(dir / "confusion_normalized.csv", normalized_csv(rep.matrix, rep.class_names));
  write_file_bytes(dir / "confusion.png", encode_png(confusion_heatmap(rep.matrix, false)));
  write_file_bytes(dir / "confusion_normalized.png", encode_png(confusion_heatmap(rep.matrix, true)));
  write_text(dir / "metrics.json", rep.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Stages

inline std::filesystem::path dataset_dir(const std::filesystem::path& run) { return run / "dataset"; }

inline void write_resolved_config(const std::filesystem::path& run, const PipelineConfig& cfg,
                                  std::size_t n_classes) {
  std::filesystem::create_directories(run);
  PipelineConfig resolved = cfg;
  resolved.mlp = resolved_mlp_config(cfg, n_classes);
  write_text(run / "config.resolved.json", pipeline_config_to_json(resolved).dump(2) + "\n");
}

struct RenderOutcome {
  DatasetManifest manifest;
  WriteSummary summary;
};

inline RenderOutcome stage_render(const Corpus& corpus, const PipelineConfig& cfg,
                                  const std::filesystem::path& run, bool dry_run) {
  cfg.validate();
  write_resolved_config(run, cfg, corpus.class_names.size());
  RenderOutcome out{build_manifest(corpus, cfg), {}};
  const auto spec = cfg.canvas;
  out.summary = write_dataset(
      out.manifest, [&](const std::string& id) { return render_event(corpus.at(id), spec); },
      dataset_dir(run), {dry_run, cfg.threads});
  auto summary = out.summary.to_json();
  summary["dropped_events"] = corpus.dropped;
  summary["dry_run"] = dry_run;
  write_text(run / "render_summary.json", summary.dump(2) + "\n");
  return out;
}

/// The run's manifest, or a freshly built one (written without images) if
/// render has not been run.
inline DatasetManifest load_or_build_manifest(const Corpus& corpus, const PipelineConfig& cfg,
                                              const std::filesystem::path& run) {
  const auto path = dataset_dir(run) / "manifest.json";
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    return manifest_from_json(nlohmann::json::parse(in));
  }
  return stage_render(corpus, cfg, run, true).manifest;
}

/// Accuracy (top panel, 0..1) and loss (bottom panel, 0..max) per epoch.
/// Train in blue, validation in red, on a white canvas with grey frames.
inline ImageTensor history_plot(const std::vector<EpochStats>& h, int width = 480, int panel = 200) {
  ImageTensor img(width, 2 * panel + 3);
  const Rgb frame{160, 160, 160}, blue{0, 0, 255}, red{255, 0, 0};
  for (int p = 0; p < 2; ++p) {
    const int top = p * (panel + 1);
    for (int x = 0; x < width; ++x) {
      img.set(x, top, frame);
      img.set(x, top + panel + 1, frame);
    }
    for (int y = top; y <= top + panel + 1; ++y) {
      img.set(0, y, frame);
      img.set(width - 1, y, frame);
    }
  }
  if (h.empty()) return img;
  double max_loss = 0;
  for (const auto& e : h) max_loss = std::max({max_loss, e.train_loss, e.val_loss});
  if (!(max_loss > 0)) max_loss = 1;
  auto line = [&](int x0, int y0, int x1, int y1, Rgb c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      img.set(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) { err += dy; x0 += sx; }
      if (e2 <= dx) { err += dx; y0 += sy; }
    }
  };
  const int n = static_cast<int>(h.size());
  auto px = [&](int i) { return n == 1 ? width / 2 : 1 + (width - 3) * i / (n - 1); };
  auto py = [&](int p, double f) {
    f = std::clamp(f, 0.0, 1.0);
    return p * (panel + 1) + 1 + static_cast<int>(std::lround((panel - 1) * (1 - f)));
  };
  auto series = [&](int p, Rgb c, auto value) {
    for (int i = 0; i < n; ++i) {
      const int x = px(i), y = py(p, value(h[static_cast<std::size_t>(i)]));
      if (i == 0) img.set(x, y, c);
      else line(px(i - 1), py(p, value(h[static_cast<std::size_t>(i - 1)])), x, y, c);
    }
  };
  series(0, blue, [](const EpochStats& e) { return e.train_acc; });
  series(0, red, [](const EpochStats& e) { return e.val_acc; });
  series(1, blue, [&](const EpochStats& e) { return e.train_loss / max_loss; });
  series(1, red, [&](const EpochStats& e) { return e.val_loss / max_loss; });
  return img;
}

inline TrainResult<float> stage_train(const Corpus& corpus, const DatasetManifest& manifest,
                                      const PipelineConfig& cfg, const std::filesystem::path& run,
                                      const std::function<bool(const EpochStats&)>& on_epoch = {}) {
  cfg.validate();
  auto result = train_ffn(corpus, manifest, cfg, on_epoch);
  std::filesystem::create_directories(run);
  write_text(run / "model.json", mlp_to_json(result.model).dump() + "\n");
  write_text(run / "history.csv", history_csv(result.history));
  write_file_bytes(run / "history.png", encode_png(history_plot(result.history)));
  return result;
}

inline Mlp<float> load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model " + path.string());
  try {
    return mlp_from_json<float>(nlohmann::json::parse(in));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("model " + path.string() + ": " + e.what());
  }
}

inline Report stage_evaluate(const Corpus& corpus, const DatasetManifest& manifest,
                             const Mlp<float>& model, const PipelineConfig& cfg,
                             const std::filesystem::path& run) {
  const auto table = feature_table(corpus, manifest.entries(Split::Test), cfg.features);
  const auto rows = predict_rows(model, table);
  write_text(run / "predictions.csv", predictions_csv(rows, manifest.class_names));
  auto rep = make_report(rows, manifest, Split::Test, cfg.signal_class);
  write_report_files(run, rep);
  return rep;
}

} // namespace evimg
