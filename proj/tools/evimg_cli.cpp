// evimg: event files to images, baseline training and reports.
//
// Exit codes: 0 success, 1 validation or I/O failure, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "evimg/evimg.hpp"

namespace fs = std::filesystem;
using namespace evimg;

namespace {

struct Common {
  std::string config;
  std::string input;
  std::string out = "run";
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<int> epochs;
  std::optional<int> hidden_layers;
  std::optional<int> hidden_units;
  std::optional<double> dropout;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  bool dry_run = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& o, bool training) {
  cmd->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("-i,--input", o.input, "NDJSON event file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o.out, "run directory")->capture_default_str();
  cmd->add_option("--mode", o.mode, "dimuon or complex (overrides the config)");
  cmd->add_option("--seed", o.seed, "global seed");
  cmd->add_option("--threads", o.threads, "render threads");
  cmd->add_flag("-q,--quiet", o.quiet, "no per-epoch progress");
  if (!training) return;
  cmd->add_option("--epochs", o.epochs);
  cmd->add_option("--hidden-layers", o.hidden_layers);
  cmd->add_option("--hidden-units", o.hidden_units);
  cmd->add_option("--dropout", o.dropout);
  cmd->add_option("--learning-rate", o.learning_rate);
  cmd->add_option("--batch-size", o.batch_size);
}

PipelineConfig resolve(const Common& o) {
  std::optional<PipelineMode> mode;
  if (!o.mode.empty()) mode = mode_from_string(o.mode);
  PipelineConfig c = o.config.empty() ? PipelineConfig::for_mode(mode.value_or(PipelineMode::Dimuon))
                                      : load_pipeline_config(o.config, mode);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.epochs) c.mlp.epochs = *o.epochs;
  if (o.hidden_layers) c.mlp.hidden_layers = *o.hidden_layers;
  if (o.hidden_units) c.mlp.hidden_units = *o.hidden_units;
  if (o.dropout) c.mlp.dropout_rate = *o.dropout;
  if (o.learning_rate) c.mlp.learning_rate = *o.learning_rate;
  if (o.batch_size) c.mlp.batch_size = *o.batch_size;
  c.validate();
  return c;
}

std::function<bool(const EpochStats&)> progress(bool quiet) {
  if (quiet) return {};
  return [](const EpochStats& e) {
    std::fprintf(stderr, "epoch %3d  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f\n", e.epoch,
                 e.train_loss, e.train_acc, e.val_loss, e.val_acc);
    return true;
  };
}

Corpus corpus_for(const Common& o, const PipelineConfig& cfg) {
  auto c = load_corpus(o.input, cfg);
  std::fprintf(stderr, "%zu events, %zu dropped, classes:", c.events.size(), c.dropped);
  for (const auto& n : c.class_names) std::fprintf(stderr, " %s", n.c_str());
  std::fprintf(stderr, "\n");
  return c;
}

int cmd_generate(const std::string& mode, std::size_t per_class, std::uint64_t seed,
                 const std::string& out_path) {
  const auto m = mode_from_string(mode);
  const auto spec = GeneratorSpec::defaults(seed);
  spec.validate();
  EventFileHeader h;
  h.source = "evimg generate";
  std::vector<Event> events;
  if (m == PipelineMode::Dimuon) {
    h.class_names = dimuon_class_names();
    events = generate_dimuon_sample(per_class, spec);
  } else {
    h.class_names = complex_class_names();
    events = generate_complex_sample(per_class, spec);
  }
  std::ofstream f;
  if (out_path != "-") {
    f.open(out_path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot create " + out_path);
  }
  std::ostream& out = out_path == "-" ? std::cout : f;
  EventWriter w(out, h);
  for (const auto& ev : events) w.write(ev);
  out.flush();
  if (!out) throw IoError("write failed for " + out_path);
  std::fprintf(stderr, "wrote %zu events\n", events.size());
  return 0;
}

int cmd_ingest(const std::string& input, bool lenient, const std::string& report_path) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IoError("cannot open " + input);
  EventReader reader(in);
  ValidationReport rep;
  std::set<std::string> ids;
  for (;;) {
    try {
      auto ev = reader.next();
      if (!ev) break;
      ++rep.parsed;
      if (!ids.insert(ev->id).second) ++rep.duplicate_ids;
    } catch (const ParseError& e) {
      ++rep.rejected;
      if (rep.first_violations.size() < 10) rep.first_violations.push_back(e.what());
      std::fprintf(stderr, "rejected: %s\n", e.what());
    }
  }
  rep.unknown_field_warnings = reader.unknown_field_warnings();
  std::printf("parsed: %zu\nrejected: %zu\nduplicate ids: %zu\nunknown fields ignored: %zu\n",
              rep.parsed, rep.rejected, rep.duplicate_ids, rep.unknown_field_warnings);
  if (!reader.header().class_names.empty()) {
    std::printf("classes:");
    for (const auto& n : reader.header().class_names) std::printf(" %s", n.c_str());
    std::printf("\n");
  }
  if (!report_path.empty()) write_text(report_path, rep.to_json().dump(2) + "\n");
  return (rep.rejected > 0 || rep.duplicate_ids > 0) && !lenient ? 1 : 0;
}

void print_render(const RenderOutcome& r, bool dry_run) {
  for (auto s : kSplits)
    std::printf("%s: %zu entries\n", to_string(s), r.manifest.entries(s).size());
  if (dry_run)
    std::printf("dry run: manifest only\n");
  else
    std::printf("images written: %zu (%zu unique renders, %.2f s)\n", r.summary.files_written,
                r.summary.unique_renders, r.summary.wall_seconds);
}

int cmd_render(const Common& o) {
  const auto cfg = resolve(o);
  const auto corpus = corpus_for(o, cfg);
  print_render(stage_render(corpus, cfg, o.out, o.dry_run), o.dry_run);
  return 0;
}

int cmd_train(const Common& o) {
  const auto cfg = resolve(o);
  const auto corpus = corpus_for(o, cfg);
  const auto manifest = load_or_build_manifest(corpus, cfg, o.out);
  const auto r = stage_train(corpus, manifest, cfg, o.out, progress(o.quiet));
  if (!r.history.empty())
    std::printf("epochs: %zu\nfinal val_acc: %.6f\n", r.history.size(), r.history.back().val_acc);
  std::printf("model: %s\n", (fs::path(o.out) / "model.json").string().c_str());
  return 0;
}

int cmd_evaluate(const Common& o, const std::string& model_path) {
  const auto cfg = resolve(o);
  const auto corpus = corpus_for(o, cfg);
  const auto manifest = load_or_build_manifest(corpus, cfg, o.out);
  const auto model =
      load_model(model_path.empty() ? fs::path(o.out) / "model.json" : fs::path(model_path));
  std::fputs(format_report(stage_evaluate(corpus, manifest, model, cfg, o.out)).c_str(), stdout);
  return 0;
}

int cmd_report(const std::string& predictions, const std::string& manifest_path,
               const std::string& split_name, int signal, const std::string& out) {
  std::ifstream pin(predictions, std::ios::binary);
  if (!pin) throw IoError("cannot open " + predictions);
  const auto rows = read_predictions_csv(pin);
  std::ifstream min(manifest_path);
  if (!min) throw IoError("cannot open " + manifest_path);
  DatasetManifest manifest;
  try {
    manifest = manifest_from_json(nlohmann::json::parse(min));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("manifest " + manifest_path + ": " + e.what());
  }
  std::optional<Split> split;
  for (auto s : kSplits)
    if (to_string(s) == split_name) split = s;
  if (!split) throw ConfigError("unknown split '" + split_name + "'");
  const auto rep = make_report(rows, manifest, *split, signal);
  std::fputs(format_report(rep).c_str(), stdout);
  if (!out.empty()) write_report_files(out, rep);
  return 0;
}

int cmd_run(const Common& o) {
  const auto cfg = resolve(o);
  const auto corpus = corpus_for(o, cfg);
  const auto r = stage_render(corpus, cfg, o.out, o.dry_run);
  print_render(r, o.dry_run);
  const auto t = stage_train(corpus, r.manifest, cfg, o.out, progress(o.quiet));
  std::fputs(format_report(stage_evaluate(corpus, r.manifest, t.model, cfg, o.out)).c_str(), stdout);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"evimg: collision events as images, with a feed-forward baseline"};
  app.require_subcommand(1);

  std::string gen_mode = "dimuon", gen_out = "-";
  std::size_t per_class = 1000;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("generate", "write a synthetic labelled event file");
  gen->add_option("--mode", gen_mode)->capture_default_str();
  gen->add_option("-n,--per-class", per_class)->capture_default_str();
  gen->add_option("--seed", gen_seed)->capture_default_str();
  gen->add_option("-o,--out", gen_out, "output file, - for stdout")->capture_default_str();

  std::string ing_input, ing_report;
  bool lenient = false;
  auto* ing = app.add_subcommand("ingest", "validate and summarize an event file");
  ing->add_option("-i,--input,input", ing_input)->required()->check(CLI::ExistingFile);
  ing->add_flag("--lenient", lenient, "count rejected records but exit 0");
  ing->add_option("--report", ing_report, "write the summary as JSON");

  Common render_o, train_o, eval_o, run_o;
  auto* ren = app.add_subcommand("render", "select, split, balance and write the image dataset");
  add_common(ren, render_o, false);
  ren->add_flag("--dry-run", render_o.dry_run, "write the manifest only");

  auto* trn = app.add_subcommand("train-ffn", "train the feed-forward baseline");
  add_common(trn, train_o, true);

  std::string model_path;
  auto* ev = app.add_subcommand("evaluate", "predict the test split and write metrics");
  add_common(ev, eval_o, false);
  ev->add_option("--model", model_path, "model file (default <out>/model.json)");

  std::string rep_pred, rep_manifest, rep_split = "test", rep_out;
  int rep_signal = 0;
  auto* rep = app.add_subcommand("report", "confusion matrix and efficiency from a predictions CSV");
  rep->add_option("-p,--predictions", rep_pred)->required()->check(CLI::ExistingFile);
  rep->add_option("-m,--manifest", rep_manifest)->required()->check(CLI::ExistingFile);
  rep->add_option("--split", rep_split)->capture_default_str();
  rep->add_option("--signal", rep_signal, "signal class id")->capture_default_str();
  rep->add_option("-o,--out", rep_out, "directory for CSV, PNG and JSON outputs");

  auto* run = app.add_subcommand("run", "render, train and evaluate in one go");
  add_common(run, run_o, true);
  run->add_flag("--dry-run", run_o.dry_run, "skip writing PNGs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_generate(gen_mode, per_class, gen_seed, gen_out);
    if (*ing) return cmd_ingest(ing_input, lenient, ing_report);
    if (*ren) return cmd_render(render_o);
    if (*trn) return cmd_train(train_o);
    if (*ev) return cmd_evaluate(eval_o, model_path);
    if (*rep) return cmd_report(rep_pred, rep_manifest, rep_split, rep_signal, rep_out);
    if (*run) return cmd_run(run_o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
