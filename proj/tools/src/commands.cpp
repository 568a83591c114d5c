#include "pnp_cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "pnp/checkpoint.hpp"
#include "pnp/datagen.hpp"
#include "pnp/errors.hpp"
#include "pnp/evaluation.hpp"
#include "pnp/metrics.hpp"
#include "pnp/random.hpp"
#include "pnp/trainer.hpp"
#include "pnp_cli/run_config.hpp"

namespace pnp::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string epoch_checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch-%04zu.ckpt", epoch);
  return buf;
}

fs::path manifest_path(const fs::path& dataset) {
  fs::path p = dataset;
  p += ".manifest.json";
  return p;
}

std::vector<std::size_t> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions '" + path.string() + "'");
  std::vector<std::size_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    std::size_t v = 0;
    const char* first = line.data() + b;
    const char* last = line.data() + e + 1;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
      throw ParseError("predictions: expected a cluster id", lineno);
    out.push_back(v);
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<std::size_t> to_ids(const ClusterResult& c) {
  return {c.assignment.begin(), c.assignment.end()};
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::size_t classes = 0;
  std::size_t old = 0;
  std::size_t per_class = 100;
  std::size_t dim = 32;
  double sep = 6.0;
  double noise = 1.0;
  double labelled_fraction = 0.5;
  std::uint64_t seed = 0;
  std::size_t plant_pairs = 0;
  double plant_angle = 0.08;
  std::string out = "dataset.gcd";
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  if (a.old == 0 || a.old > a.classes)
    throw ConfigError("--old must be between 1 and --classes");
  MixtureParams mp;
  mp.num_classes = a.classes;
  mp.dim = a.dim;
  mp.per_class = a.per_class;
  mp.class_sep = a.sep;
  mp.noise_sd = a.noise;
  mp.seed = a.seed;
  LabelledPoints pts = generate_mixture(mp);

  // Pairs are planted among the new classes, which follow the old ones.
  if (2 * a.plant_pairs > a.classes - a.old)
    throw ConfigError("--plant-pairs needs two new classes per pair");
  for (std::size_t p = 0; p < a.plant_pairs; ++p) {
    const auto anchor = static_cast<ClassId>(a.old + 2 * p);
    plant_close_pair(pts, anchor, anchor + 1, a.plant_angle, derive_seed({a.seed, p}));
  }

  const double old_fraction = static_cast<double>(a.old) / static_cast<double>(a.classes);
  const GcdDataset ds = split_gcd(pts, old_fraction, a.labelled_fraction, a.seed);
  save_dataset(ds, a.out);

  Json m;
  m["dataset"] = fs::path(a.out).filename().string();
  m["format"] = "pnp-gcd 1";
  m["params"] = {{"classes", a.classes},     {"old", a.old},
                 {"per_class", a.per_class}, {"dim", a.dim},
                 {"sep", a.sep},             {"noise", a.noise},
                 {"labelled_fraction", a.labelled_fraction},
                 {"seed", a.seed},           {"plant_pairs", a.plant_pairs},
                 {"plant_angle", a.plant_angle}};
  m["counts"] = {{"labelled", ds.num_labelled()},
                 {"unlabelled", ds.num_unlabelled()},
                 {"old_classes", ds.old_classes.size()},
                 {"all_classes", ds.all_classes.size()}};
  write_text(manifest_path(a.out), m.dump(2) + "\n");

  out << "wrote " << a.out << ": " << ds.num_labelled() << " labelled, " << ds.num_unlabelled()
      << " unlabelled, " << ds.old_classes.size() << "/" << ds.all_classes.size()
      << " old/all classes\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string run_dir = "run";
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::string> ablations;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> checkpoint_every;
  bool quiet = false;
};

RunConfig resolve_train_config(const TrainArgs& a) {
  RunConfig cfg;
  if (!a.config.empty()) apply_config_file(cfg, a.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.seed) {
    cfg.train.seed = *a.seed;
    cfg.train.shuffle_seed = *a.seed;
  }
  if (a.lr) cfg.train.lr = *a.lr;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
  for (const auto& name : a.ablations) apply_ablation(cfg, name);
  cfg.train.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const GcdDataset ds = load_dataset(a.data);
  const RunConfig cfg = resolve_train_config(a);

  const fs::path dir = a.run_dir;
  const fs::path ckpt_dir = dir / kCheckpointDir;
  fs::create_directories(ckpt_dir);
  write_text(dir / kConfigFile, dump_config(cfg));

  std::ofstream metrics(dir / kMetricsFile);
  if (!metrics) throw IoError("cannot open metrics stream in '" + dir.string() + "'");

  ProberState state = init_state(ds, cfg.train);
  try {
    train(state, ds, cfg.train, [&](const ProberState& s, const EpochMetrics& m) {
      metrics << epoch_record(m) << '\n';
      metrics.flush();
      if (cfg.checkpoint_every && (m.epoch + 1) % cfg.checkpoint_every == 0)
        save_checkpoint(ckpt_dir / epoch_checkpoint_name(m.epoch + 1), s);
      if (!a.quiet) {
        char line[160];
        std::snprintf(line, sizeof line, "epoch %4zu  K^e %3zu  loss %.5f  lr %.5f  omega %.4f\n",
                      m.epoch, m.k_est, m.losses.total, m.lr, m.omega);
        out << line;
      }
    });
  } catch (const DivergenceError&) {
    save_checkpoint(ckpt_dir / kDivergedCheckpoint, state);
    throw;
  }
  save_checkpoint(ckpt_dir / kFinalCheckpoint, state);

  const ClusterResult clusters = infer(state, ds.unlabelled_x, cfg.train);
  const auto pred = to_ids(clusters);
  const EvalReport eval = clustering_accuracy(ds.unlabelled_y, pred, ds.old_classes);
  const BiasReport bias = bias_report(ds.unlabelled_y, pred, eval.matching, ds.old_classes);
  write_text(dir / kReportFile, eval_record(eval, bias) + "\n");
  out << eval_table(eval, bias);
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string data;
  std::string predictions;
  std::string checkpoint;
  std::string config;
  std::string run_dir;
  std::string sweep;
  std::string json_out;
};

std::vector<std::size_t> parse_sweep(const std::string& text) {
  if (text.rfind("k=", 0) != 0) throw ConfigError("--sweep expects k=<list>, e.g. k=5,10,20");
  std::vector<std::size_t> ks;
  std::stringstream ss(text.substr(2));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    std::size_t v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v == 0)
      throw ConfigError("--sweep: bad neighbour count '" + tok + "'");
    ks.push_back(v);
  }
  if (ks.empty()) throw ConfigError("--sweep: empty list");
  return ks;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const GcdDataset ds = load_dataset(a.data);
  const int sources = !a.predictions.empty() + !a.checkpoint.empty() + !a.run_dir.empty();
  if (sources != 1)
    throw ConfigError("eval needs exactly one of --predictions, --checkpoint or --run");

  RunConfig cfg;
  std::optional<ProberState> state;
  if (!a.run_dir.empty()) {
    apply_config_file(cfg, fs::path(a.run_dir) / kConfigFile);
    state = load_checkpoint(fs::path(a.run_dir) / kCheckpointDir / kFinalCheckpoint);
  } else if (!a.checkpoint.empty()) {
    if (!a.config.empty()) apply_config_file(cfg, a.config);
    state = load_checkpoint(a.checkpoint);
  } else if (!a.config.empty()) {
    apply_config_file(cfg, a.config);
  }
  if (state && state->encoder.input_width() != ds.dim)
    throw ValidationError("checkpoint encoder expects dimension " +
                          std::to_string(state->encoder.input_width()) + ", dataset has " +
                          std::to_string(ds.dim));

  auto cluster_with = [&](const TrainConfig& tc) {
    if (state) return infer(*state, ds.unlabelled_x, tc);
    return estimate_k(l2_normalize_rows(ds.unlabelled_x), clustering_options(tc, tc.seed));
  };

  std::vector<std::size_t> pred;
  if (!a.predictions.empty()) {
    pred = read_predictions(a.predictions);
    if (pred.size() != ds.num_unlabelled())
      throw ValidationError("predictions: " + std::to_string(pred.size()) + " ids for " +
                            std::to_string(ds.num_unlabelled()) + " unlabelled instances");
  } else {
    pred = to_ids(cluster_with(cfg.train));
  }

  const EvalReport eval = clustering_accuracy(ds.unlabelled_y, pred, ds.old_classes);
  const BiasReport bias = bias_report(ds.unlabelled_y, pred, eval.matching, ds.old_classes);
  out << eval_table(eval, bias);
  const std::string record = eval_record(eval, bias);
  out << record << '\n';
  if (!a.json_out.empty()) write_text(a.json_out, record + "\n");

  if (!a.sweep.empty()) {
    if (!a.predictions.empty()) throw ConfigError("--sweep needs features, not --predictions");
    out << "\n    k   K^e   ACC\n";
    std::string lines;
    for (std::size_t k : parse_sweep(a.sweep)) {
      TrainConfig tc = cfg.train;
      tc.knn_k = k;
      const auto p = to_ids(cluster_with(tc));
      const EvalReport r = clustering_accuracy(ds.unlabelled_y, p, ds.old_classes);
      char line[96];
      std::snprintf(line, sizeof line, "%5zu %5zu  %.4f\n", k, r.k_est, r.acc_all);
      out << line;
      Json j;
      j["k"] = k;
      j["k_est"] = r.k_est;
      j["acc_all"] = r.acc_all;
      lines += j.dump() + "\n";
    }
    out << lines;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string data;
  std::string sizes = "1000,4000,8000";
  std::size_t repeats = kMinTimingRepeats;
  std::size_t k = 10;
  double tau_f = 0.6;
  std::uint64_t seed = 0;
};

struct BenchInput {
  std::string label;
  Matrix full;
  Matrix unlabelled;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  if (a.repeats < kMinTimingRepeats)
    err << "warning: --repeats " << a.repeats << " is below " << kMinTimingRepeats
        << "; medians will be noisy\n";

  std::vector<BenchInput> inputs;
  if (!a.data.empty()) {
    const GcdDataset ds = load_dataset(a.data);
    const Matrix u = l2_normalize_rows(ds.unlabelled_x);
    inputs.push_back({a.data, vstack(l2_normalize_rows(ds.labelled_x), u), u});
  } else {
    std::stringstream ss(a.sizes);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      std::size_t n = 0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), n);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || n < 40)
        throw ConfigError("--sizes: bad size '" + tok + "' (need >= 40)");
      // 10 classes, half old, half of those labelled: labelled:unlabelled = 1:3.
      MixtureParams mp;
      mp.per_class = n / 10;
      mp.seed = derive_seed({a.seed, n});
      const GcdDataset ds = split_gcd(generate_mixture(mp), 0.5, 0.5, mp.seed);
      const Matrix u = l2_normalize_rows(ds.unlabelled_x);
      inputs.push_back({std::to_string(n), vstack(l2_normalize_rows(ds.labelled_x), u), u});
    }
  }

  EstimateKOptions opts;
  opts.k = a.k;
  opts.tau_f = a.tau_f;
  opts.infomap.seed = a.seed;

  char line[160];
  std::snprintf(line, sizeof line, "%12s %8s %12s %14s %8s\n", "input", "rows", "full ms",
                "unlabelled ms", "ratio");
  out << line;
  std::string records;
  for (const auto& in : inputs) {
    const ClusteringTiming t = bench_clustering(in.full, in.unlabelled, opts, a.repeats);
    std::snprintf(line, sizeof line, "%12s %8zu %12.2f %14.2f %8.2f\n", in.label.c_str(),
                  in.full.rows(), t.full_ms, t.unlabelled_ms, t.ratio());
    out << line;
    Json j;
    j["input"] = in.label;
    j["rows_full"] = in.full.rows();
    j["rows_unlabelled"] = in.unlabelled.rows();
    j["repeats"] = t.repeats;
    j["full_ms"] = t.full_ms;
    j["unlabelled_ms"] = t.unlabelled_ms;
    j["ratio"] = t.ratio();
    j["k_full"] = t.full_k;
    j["k_unlabelled"] = t.unlabelled_k;
    records += j.dump() + "\n";
  }
  out << records;
  return kExitOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kExitDivergence;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e))
    return kExitUsage;
  return kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Generalized category discovery with potential prototype probing"};
  app.name("pnp");
  app.require_subcommand(1);
  app.set_version_flag("--version", "pnp 0.1.0");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic labelled/unlabelled dataset");
  g->add_option("--classes", gen.classes, "Number of classes")->required()->check(CLI::Range(2, 100000));
  g->add_option("--old", gen.old, "Number of old (labelled) classes")->required();
  g->add_option("--per-class", gen.per_class, "Points per class")->capture_default_str();
  g->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
  g->add_option("--sep", gen.sep, "Norm of the class means")->capture_default_str();
  g->add_option("--noise", gen.noise, "RMS norm of the per-point noise")->capture_default_str();
  g->add_option("--labelled-fraction", gen.labelled_fraction,
                "Share of each old class that is labelled")->capture_default_str();
  g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  g->add_option("--plant-pairs", gen.plant_pairs,
                "Pairs of new classes moved close together")->capture_default_str();
  g->add_option("--plant-angle", gen.plant_angle,
                "Angle in radians between planted pair means")->capture_default_str();
  g->add_option("-o,--out", gen.out, "Output dataset path")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train on a dataset and write a run directory");
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("-o,--out", tr.run_dir, "Run directory")->capture_default_str();
  t->add_option("--config", tr.config, "key=value config file (flags override it)");
  t->add_option("--set", tr.sets, "Override one config key, key=value (repeatable)");
  t->add_option("--epochs", tr.epochs, "Number of epochs");
  t->add_option("--seed", tr.seed, "Initialization and shuffle seed");
  t->add_option("--lr", tr.lr, "Initial learning rate");
  t->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Checkpoint period in epochs (0: final only)");
  t->add_option("--ablate", tr.ablations, "Ablation switch (repeatable)")
      ->check(CLI::IsMember(ablation_names()));
  t->add_flag("-q,--quiet", tr.quiet, "Suppress per-epoch progress lines");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predictions or a trained checkpoint");
  e->add_option("--data", ev.data, "Dataset file")->required();
  e->add_option("--predictions", ev.predictions, "Cluster id per unlabelled row");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint to cluster with");
  e->add_option("--config", ev.config, "Config used with --checkpoint");
  e->add_option("--run", ev.run_dir, "Run directory (uses its config and final checkpoint)");
  e->add_option("--sweep", ev.sweep, "Neighbour-count sweep, e.g. k=5,10,20,40");
  e->add_option("--json", ev.json_out, "Also write the JSON report here");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Time clustering on all features vs unlabelled only");
  b->add_option("--data", be.data, "Dataset file (otherwise generate data of --sizes)");
  b->add_option("--sizes", be.sizes, "Comma-separated total sizes to generate")->capture_default_str();
  b->add_option("--repeats", be.repeats, "Timed repetitions per input")->capture_default_str()
      ->check(CLI::PositiveNumber);
  b->add_option("--k", be.k, "Neighbours kept per node")->capture_default_str();
  b->add_option("--tau-f", be.tau_f, "Edge similarity threshold")->capture_default_str();
  b->add_option("--seed", be.seed, "Random seed")->capture_default_str();

  std::vector<const char*> argv{"pnp"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_eval(ev, out);
    if (b->parsed()) return cmd_bench(be, out, err);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return exit_code_for(ex);
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace pnp::cli
