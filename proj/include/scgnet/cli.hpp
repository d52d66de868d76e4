#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scgnet/baselines.hpp"
#include "scgnet/config.hpp"
#include "scgnet/cv.hpp"
#include "scgnet/dataset.hpp"
#include "scgnet/manifest.hpp"
#include "scgnet/metrics.hpp"
#include "scgnet/preprocess.hpp"
#include "scgnet/smote.hpp"
#include "scgnet/train.hpp"
#include "scgnet/tune.hpp"

namespace scgnet::cli {

namespace fs = std::filesystem;
using J = nlohmann::ordered_json;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string task;
  std::vector<std::string> sets;
  std::string out_dir;
};

/// Seeds for each consumer, all derived from run.seed.
struct Seeds {
  std::uint64_t model, train, smote, split, search;
  explicit Seeds(const config::RunConfig& c)
      : model(derive_seed(derive_seed(c.seed, 0x6d), c.model.seed)),
        train(derive_seed(c.seed, 0x74)),
        smote(derive_seed(c.seed, 0x73)),
        split(derive_seed(c.seed, 0x68)),
        search(derive_seed(c.seed, 0x75)) {}
};

/// State shared by one subcommand invocation.
class Run {
 public:
  Run(std::string command, const Globals& g, std::vector<std::string> argv, std::ostream& log)
      : command_(std::move(command)), log_(log) {
    config::Overrides ov;
    if (!g.task.empty()) ov.emplace_back("run.task", g.task);
    if (g.seed) ov.emplace_back("run.seed", std::to_string(*g.seed));
    for (const auto& s : g.sets) ov.push_back(config::parse_assignment(s));
    extra_overrides_ = ov;
    config_path_ = g.config;
    out_ = g.out_dir.empty() ? fs::path("runs") / command_ : fs::path(g.out_dir);
    man_.command = command_;
    man_.argv = std::move(argv);
    man_.started = manifest::utc_now();
  }

  /// Subcommand flags are applied after the global ones.
  void resolve(const config::Overrides& more = {}) {
    auto ov = extra_overrides_;
    ov.insert(ov.end(), more.begin(), more.end());
    if (config_path_.empty()) {
      cfg = config::parse_config("", ov);
    } else {
      cfg = config::load_config(config_path_, ov);
      man_.add_input(config_path_);
    }
    man_.seed = cfg.seed;
    man_.config = config::to_ini(cfg);
    fs::create_directories(out_);
    manifest_path_ = manifest::next_path(out_, command_);
  }

  const fs::path& out() const { return out_; }
  std::ostream& log() { return log_; }
  std::string manifest_name() const { return manifest_path_.filename().string(); }

  void input(const fs::path& p) { man_.add_input(p); }

  void write_text(const fs::path& p, const std::string& text) {
    io::write_text(p, text);
    man_.add_output(p);
  }
  void output(const fs::path& p) { man_.add_output(p); }

  fs::path finish() {
    man_.finished = manifest::utc_now();
    manifest::write(manifest_path_, man_);
    return manifest_path_;
  }

  config::RunConfig cfg;

 private:
  std::string command_;
  std::ostream& log_;
  config::Overrides extra_overrides_;
  std::string config_path_;
  fs::path out_;
  fs::path manifest_path_;
  manifest::RunManifest man_;
};

// ---------------------------------------------------------------------------
// shared steps

inline fs::path resolve_taxonomy(const std::string& configured) {
  fs::path p = configured;
  if (fs::exists(p)) return p;
#ifdef SCGNET_DATA_DIR
  if (p.is_relative()) {
    const auto alt = fs::path(SCGNET_DATA_DIR) / p.filename();
    if (fs::exists(alt)) return alt;
  }
#endif
  throw Error(Errc::MissingFile, "taxonomy file not found: " + configured);
}

inline data::LabeledSet load_data(Run& run, const std::string& path, const std::string& what) {
  if (path.empty()) throw Error(Errc::MissingFile, what + " data path not given (flag or data." + what + ")");
  if (!fs::is_regular_file(path)) throw Error(Errc::MissingFile, what + " data not found: " + path);
  const auto tax_path = resolve_taxonomy(run.cfg.data.taxonomy);
  const auto tax = data::AttackTaxonomy::load(tax_path);
  run.input(path);
  run.input(tax_path);
  return data::load_labeled(path, &tax, {run.cfg.data.coerce_unknown});
}

inline bool multiclass(const config::RunConfig& c) { return c.task == model::Task::Multiclass; }

inline std::vector<std::string> class_names(model::Task t) {
  if (t == model::Task::Binary) return {data::kBinaryNames.begin(), data::kBinaryNames.end()};
  return {data::kClassNames.begin(), data::kClassNames.end()};
}

inline std::vector<data::LabeledExample> pick(const std::vector<data::LabeledExample>& ex,
                                              const std::vector<std::size_t>& idx) {
  std::vector<data::LabeledExample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ex[i]);
  return out;
}

inline train::SmoteOptions smote_options(const config::RunConfig& c, const Seeds& s) {
  train::SmoteOptions o;
  o.enabled = c.smote.enabled_for(c.task);
  o.config.k_neighbors = c.smote.k_neighbors;
  o.config.seed = s.smote;
  return o;
}

inline model::ScgnetConfig model_config(const config::RunConfig& c, const Seeds& s, std::size_t width) {
  auto m = c.model;
  m.input_length = width;
  m.seed = s.model;
  return m;
}

inline train::TrainConfig train_config(const config::RunConfig& c, const Seeds& s) {
  auto t = c.train;
  t.seed = s.train;
  return t;
}

inline J transform_json(const prep::Pipeline& p, const prep::TransformReport& r) {
  J j{{"rows", r.rows}, {"width", r.width}, {"unknown_total", r.unknown_total()}};
  for (std::size_t i = 0; i < p.encoder.columns.size(); ++i) {
    j["unknown_per_column"][p.schema.column_name(p.encoder.columns[i])] = r.unknown_per_column[i];
  }
  return j;
}

// ---------------------------------------------------------------------------
// subcommands

struct IngestArgs {
  std::string data;
  std::string out;
};

inline int cmd_ingest(Run& run, const IngestArgs& a, std::ostream& out) {
  run.resolve(a.data.empty() ? config::Overrides{} : config::Overrides{{"data.train", a.data}});
  const auto set = load_data(run, run.cfg.data.train, "train");
  const fs::path dst = a.out.empty() ? run.out() / (fs::path(run.cfg.data.train).stem().string() + ".nslc") : fs::path(a.out);
  data::write_columnar(dst, set);
  run.output(dst);
  const auto summary = data::ingest_summary(set, run.cfg.data.train, io::file_crc32(run.cfg.data.train));
  const auto side = fs::path(dst.string() + ".summary.json");
  run.write_text(side, summary.dump(2) + "\n");
  run.finish();
  out << summary.dump(2) << "\n";
  return 0;
}

struct PreprocessArgs {
  std::string train;
  std::string test;
};

inline int cmd_preprocess(Run& run, const PreprocessArgs& a, std::ostream& out) {
  config::Overrides ov;
  if (!a.train.empty()) ov.emplace_back("data.train", a.train);
  if (!a.test.empty()) ov.emplace_back("data.test", a.test);
  run.resolve(ov);
  const auto train = load_data(run, run.cfg.data.train, "train");
  const auto p = prep::fit_pipeline(train.examples, train.schema);
  prep::TransformReport tr;
  (void)prep::transform(p, train.examples, &tr);
  J j{{"pipeline_crc32", io::hex32(prep::state_hash(p))}, {"width", p.width()}, {"train", transform_json(p, tr)}};
  if (!run.cfg.data.test.empty()) {
    const auto test = load_data(run, run.cfg.data.test, "test");
    prep::TransformReport te;
    (void)prep::transform(p, test.examples, &te);
    j["test"] = transform_json(p, te);
  }
  j["features"] = prep::feature_names(p);
  const auto path = run.out() / "pipeline.scgp";
  prep::save_pipeline(path, p);
  run.output(path);
  run.write_text(run.out() / "transform.json", j.dump(2) + "\n");
  run.finish();
  out << "pipeline width " << p.width() << " written to " << path.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string train;
};

inline int cmd_train(Run& run, const TrainArgs& a, std::ostream& out) {
  run.resolve(a.train.empty() ? config::Overrides{} : config::Overrides{{"data.train", a.train}});
  const auto& cfg = run.cfg;
  const Seeds seeds(cfg);
  const auto set = load_data(run, cfg.data.train, "train");
  const bool multi = multiclass(cfg);
  const auto labels = prep::task_labels(set.examples, multi);
  const auto split = train::stratified_holdout(labels, cfg.data.val_fraction, seeds.split);
  const auto train_ex = pick(set.examples, split.train);
  const auto val_ex = pick(set.examples, split.val);

  const auto p = prep::fit_pipeline(train_ex, set.schema);
  auto tr = prep::encode(p, train_ex, multi);
  const auto val = prep::encode(p, val_ex, multi);
  const auto so = smote_options(cfg, seeds);
  std::size_t synthetic = 0;
  if (so.enabled) {
    auto bal = smote::balance_classes(tr, so.config);
    for (const auto& w : bal.warnings) run.log() << "smote: " << w << "\n";
    synthetic = bal.origins.size();
    tr = std::move(bal.data);
  }
  model::Model<float> m(model_config(cfg, seeds, p.width()));
  const auto tc = train_config(cfg, seeds);
  const auto hist = train::train_model(m, tr, &val, tc);
  const auto ev = train::evaluate(m, val, tc.batch_size);

  const auto weights = run.out() / "model.scgn";
  model::save_weights(weights, m);
  run.output(weights);
  const auto pipe = run.out() / "model.scgp";
  prep::save_pipeline(pipe, p);
  run.output(pipe);
  J h = hist.to_json();
  h["train_rows"] = tr.size();
  h["synthetic_rows"] = synthetic;
  h["val_rows"] = val.size();
  h["weight_crc32"] = io::hex32(train::weight_checksum(m));
  run.write_text(run.out() / "history.json", h.dump(2) + "\n");
  const auto rep = metrics::make_report(model::task_name(cfg.task), "SCGNet", "validation hold-out",
                                        metrics::confusion(ev.predictions, val.y, static_cast<std::size_t>(val.n_classes),
                                                           class_names(cfg.task)),
                                        run.manifest_name());
  run.write_text(run.out() / "report-val.json", metrics::render_machine(rep));
  run.write_text(run.out() / "config.cfg", config::to_ini(cfg));
  run.finish();
  out << "epochs " << hist.epochs_run() << " (" << hist.stop_reason << "), val accuracy " << rep.s.accuracy
      << ", weights " << weights.string() << "\n";
  return 0;
}

inline int cmd_cv(Run& run, const TrainArgs& a, std::ostream& out) {
  run.resolve(a.train.empty() ? config::Overrides{} : config::Overrides{{"data.train", a.train}});
  const auto& cfg = run.cfg;
  const Seeds seeds(cfg);
  const auto set = load_data(run, cfg.data.train, "train");
  const auto p = prep::fit_pipeline(set.examples, set.schema);
  const auto enc = prep::encode(p, set.examples, multiclass(cfg));
  const auto rep = train::cross_validate(enc, model_config(cfg, seeds, p.width()), train_config(cfg, seeds),
                                         smote_options(cfg, seeds), class_names(cfg.task),
                                         [&](const train::FoldResult& f) {
                                           run.log() << "fold " << f.fold << ": accuracy " << f.report.s.accuracy
                                                     << " after " << f.history.epochs_run() << " epochs\n";
                                         });
  const auto problems = train::audit_folds(rep, enc.size());
  for (const auto& pr : problems) run.log() << "fold audit: " << pr << "\n";
  if (!problems.empty()) throw Error(Errc::LengthMismatch, "fold audit failed");
  run.write_text(run.out() / "cv.json", rep.to_json().dump(2) + "\n");
  run.finish();
  out << "mean accuracy " << rep.accuracy.mean << " (std " << rep.accuracy.std << ") over " << rep.folds.size()
      << " folds\n";
  return 0;
}

inline int cmd_tune(Run& run, const TrainArgs& a, std::ostream& out) {
  run.resolve(a.train.empty() ? config::Overrides{} : config::Overrides{{"data.train", a.train}});
  const auto& cfg = run.cfg;
  const Seeds seeds(cfg);
  const auto set = load_data(run, cfg.data.train, "train");
  const bool multi = multiclass(cfg);
  const auto labels = prep::task_labels(set.examples, multi);
  const auto split = train::stratified_holdout(labels, cfg.tune.holdout, seeds.split);
  const auto train_ex = pick(set.examples, split.train);
  const auto p = prep::fit_pipeline(train_ex, set.schema);
  const auto base = model_config(cfg, seeds, p.width());
  const auto tc = train_config(cfg, seeds);
  tune::TrainingEvaluator ev(prep::encode(p, train_ex, multi), prep::encode(p, pick(set.examples, split.val), multi),
                             base, tc, smote_options(cfg, seeds));

  const auto log_path = run.out() / "tune-log.jsonl";
  std::ofstream log_file(log_path, std::ios::app);
  const tune::LogSink sink = [&](const tune::LogEntry& e) {
    log_file << e.to_json().dump() << "\n";
    log_file.flush();
  };

  J summary{{"method", config::method_name(cfg.tune.method)}};
  std::vector<tune::ScoredTrial> ranked;
  if (cfg.tune.method == config::SearchMethod::Hyperband) {
    const auto hb = tune::hyperband(cfg.tune.space, cfg.tune.max_epochs, cfg.tune.eta, ev, seeds.search, p.width(), sink);
    J brackets = J::array();
    for (const auto& b : hb.brackets) {
      brackets.push_back({{"s", b.bracket.s},
                          {"n", b.bracket.n},
                          {"r", b.bracket.r},
                          {"epochs_consumed", b.halving.epochs_consumed},
                          {"budget", b.budget},
                          {"best", b.halving.best().trial.to_json()}});
      for (const auto& t : b.halving.final_round) ranked.push_back(t);
    }
    summary["max_epochs"] = cfg.tune.max_epochs;
    summary["eta"] = cfg.tune.eta;
    summary["brackets"] = brackets;
  } else {
    const auto rs = tune::random_search(cfg.tune.space, cfg.tune.trials, cfg.tune.trial_epochs, ev, seeds.search,
                                        p.width(), sink);
    ranked = rs.ranked;
    summary["trials"] = cfg.tune.trials;
    summary["trial_epochs"] = cfg.tune.trial_epochs;
    summary["failures"] = rs.failures;
  }
  tune::rank(ranked);
  log_file.close();
  run.output(log_path);
  if (ranked.empty() || !ranked.front().result.ok) throw Error(Errc::AllTrialsFailed, "no trial succeeded");
  J ranking = J::array();
  for (const auto& t : ranked) {
    auto j = t.trial.to_json();
    j["val_accuracy"] = t.result.val_accuracy;
    j["val_loss"] = t.result.val_loss;
    j["epochs"] = t.result.epochs;
    ranking.push_back(j);
  }
  summary["ranking"] = ranking;

  if (cfg.tune.final_cv_top > 0) {
    const auto full_p = prep::fit_pipeline(set.examples, set.schema);
    const auto full = prep::encode(full_p, set.examples, multi);
    J finals = J::array();
    std::vector<tune::TrialConfig> done;
    for (const auto& t : ranked) {
      if (done.size() >= cfg.tune.final_cv_top) break;
      if (!t.result.ok) continue;
      if (std::any_of(done.begin(), done.end(), [&](const auto& d) { return d.same_point(t.trial); })) continue;
      done.push_back(t.trial);
      const auto rep = train::cross_validate(full, t.trial.to_model(model_config(cfg, seeds, full_p.width())), tc,
                                             smote_options(cfg, seeds), class_names(cfg.task));
      run.log() << "final cv trial " << t.trial.id << ": accuracy " << rep.accuracy.mean << "\n";
      finals.push_back({{"trial", t.trial.to_json()},
                        {"accuracy", {{"mean", rep.accuracy.mean}, {"std", rep.accuracy.std}}},
                        {"f1", {{"mean", rep.f1.mean}, {"std", rep.f1.std}}}});
    }
    summary["final_cv"] = finals;
  }
  auto best = cfg;
  const auto bm = ranked.front().trial.to_model(cfg.model);
  best.model.conv_blocks = bm.conv_blocks;
  best.model.gru_blocks = bm.gru_blocks;
  best.model.activation = bm.activation;
  run.write_text(run.out() / "best.cfg", config::to_ini(best));
  run.write_text(run.out() / "tune.json", summary.dump(2) + "\n");
  run.finish();
  out << "best trial " << ranked.front().trial.id << ": val accuracy " << ranked.front().result.val_accuracy
      << ", config " << (run.out() / "best.cfg").string() << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string weights;
  std::string pipeline;
  std::string data;
  std::string train;
  bool baselines = false;
  bool published = true;
  std::size_t knn_k = 5;
  std::size_t knn_max_train = 0;
  std::uint64_t lr_epochs = 200;
  double lr_rate = 0.1;
};

inline int cmd_evaluate(Run& run, const EvaluateArgs& a, std::ostream& out) {
  config::Overrides ov;
  if (!a.data.empty()) ov.emplace_back("data.test", a.data);
  if (!a.train.empty()) ov.emplace_back("data.train", a.train);
  run.resolve(ov);
  const auto& cfg = run.cfg;
  if (!fs::is_regular_file(a.weights)) throw Error(Errc::MissingFile, "weights not found: " + a.weights);
  const fs::path pipe_path = a.pipeline.empty() ? fs::path(a.weights).replace_extension(".scgp") : fs::path(a.pipeline);
  if (!fs::is_regular_file(pipe_path)) throw Error(Errc::MissingFile, "pipeline not found: " + pipe_path.string());
  run.input(a.weights);
  run.input(pipe_path);
  auto loaded = model::load_weights(a.weights);
  auto& m = *loaded.model;
  const auto task = m.config().task();
  const bool multi = task == model::Task::Multiclass;
  const auto p = prep::load_pipeline(pipe_path);
  if (p.width() != m.config().input_length) {
    throw Error(Errc::ShapeMismatch, "pipeline width " + std::to_string(p.width()) + " but model expects " +
                                         std::to_string(m.config().input_length));
  }
  const auto test = load_data(run, cfg.data.test, "test");
  prep::TransformReport tr;
  const auto enc = prep::encode(p, test.examples, multi, &tr);
  if (tr.unknown_total() > 0) run.log() << "unknown categories in test data: " << tr.unknown_total() << "\n";
  const auto dataset = fs::path(cfg.data.test).filename().string();
  const auto names = class_names(task);
  const auto n = static_cast<std::size_t>(enc.n_classes);
  const auto ev = train::evaluate(m, enc, cfg.train.batch_size);
  std::vector<metrics::EvalReport> reports{metrics::make_report(model::task_name(task), "SCGNet", dataset,
                                                                metrics::confusion(ev.predictions, enc.y, n, names),
                                                                run.manifest_name())};
  if (a.baselines) {
    const auto train = load_data(run, cfg.data.train, "train");
    auto tr_std = prep::encode(p, train.examples, multi);
    auto tr_unit = prep::encode(p, train.examples, multi, nullptr, prep::NumericView::UnitRange);
    const auto te_unit = prep::encode(p, test.examples, multi, nullptr, prep::NumericView::UnitRange);
    const auto lr = baselines::fit_logreg(tr_std, {a.lr_rate, a.lr_epochs, cfg.seed});
    reports.push_back(metrics::make_report(model::task_name(task), "LR", dataset,
                                           metrics::confusion(baselines::logreg_predict(lr, enc.x), enc.y, n, names),
                                           run.manifest_name()));
    auto knn_train = tr_std;
    if (a.knn_max_train > 0 && knn_train.size() > a.knn_max_train) {
      const double frac = static_cast<double>(a.knn_max_train) / static_cast<double>(knn_train.size());
      const auto keep = train::stratified_holdout(knn_train.y, frac, derive_seed(cfg.seed, 0x6b)).val;
      knn_train = knn_train.subset(keep);
    }
    reports.push_back(metrics::make_report(model::task_name(task), "KNN", dataset,
                                           metrics::confusion(baselines::knn_predict(knn_train, enc.x, a.knn_k), enc.y,
                                                              n, names),
                                           run.manifest_name()));
    reports.push_back(metrics::make_report(model::task_name(task), multi ? "MNB" : "NB", dataset,
                                           metrics::confusion(baselines::fit_predict_mnb(tr_unit, te_unit.x), enc.y,
                                                              n, names),
                                           run.manifest_name()));
  }
  for (const auto& r : reports) {
    run.write_text(run.out() / ("report-" + r.algorithm + ".json"), metrics::render_machine(r));
  }
  const auto table = metrics::render_table(reports, a.published);
  run.write_text(run.out() / "report.txt", table);
  run.finish();
  out << table;
  return 0;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
  bool published = true;
};

inline int cmd_report(Run& run, const ReportArgs& a, std::ostream& out) {
  run.resolve();
  std::vector<metrics::EvalReport> reports;
  for (const auto& in : a.inputs) {
    if (!fs::is_regular_file(in)) throw Error(Errc::MissingFile, "report not found: " + in);
    run.input(in);
    reports.push_back(metrics::parse_machine(io::read_text(in)));
  }
  const auto table = metrics::render_table(reports, a.published);
  run.write_text(a.out.empty() ? run.out() / "table.txt" : fs::path(a.out), table);
  run.finish();
  out << table;
  return 0;
}

// ---------------------------------------------------------------------------

/// Parses argv and runs one subcommand. Exit codes: 0 success, 1 usage or
/// configuration error, 2 data error, 3 runtime or numeric error.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"SCGNet network intrusion detection", "scgnet"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Master seed (overrides run.seed)");
  app.add_option("--config", g.config, "Config file with [run] [model] [train] [tune] [smote] [data] sections");
  app.add_option("--task", g.task, "binary or multiclass")->check(CLI::IsMember({"binary", "multiclass"}));
  app.add_option("--set", g.sets, "Override any config key: section.key=value (repeatable)");
  app.add_option("--out-dir", g.out_dir, "Directory for outputs and the run manifest");

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Parse and label a raw file into the columnar format");
  ingest->add_option("--data", ia.data, "Raw NSL-KDD file");
  ingest->add_option("--out", ia.out, "Columnar output file");

  PreprocessArgs pa;
  auto* preprocess = app.add_subcommand("preprocess", "Fit the encoding pipeline and report transform statistics");
  preprocess->add_option("--train", pa.train, "Training file");
  preprocess->add_option("--test", pa.test, "Optional test file to transform with the fitted pipeline");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train one model with early stopping on a stratified hold-out");
  train->add_option("--train", ta.train, "Training file");
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  cv->add_option("--train", ta.train, "Training file");
  auto* tune = app.add_subcommand("tune", "Hyperband or random search over the architecture space");
  tune->add_option("--train", ta.train, "Training file");

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score saved weights on a labelled file");
  evaluate->add_option("--weights", ea.weights, "Weight file written by train")->required();
  evaluate->add_option("--pipeline", ea.pipeline, "Pipeline file (default: weights path with .scgp)");
  evaluate->add_option("--data", ea.data, "Labelled evaluation file");
  evaluate->add_option("--train", ea.train, "Training file for the baselines");
  evaluate->add_flag("--baselines", ea.baselines, "Also fit and score LR, KNN and multinomial NB");
  evaluate->add_flag("!--no-published", ea.published, "Omit the published comparison rows");
  evaluate->add_option("--knn-k", ea.knn_k, "Neighbours for KNN")->check(CLI::PositiveNumber);
  evaluate->add_option("--knn-max-train", ea.knn_max_train, "Stratified subsample of KNN training rows (0 = all)");
  evaluate->add_option("--lr-epochs", ea.lr_epochs, "Logistic regression epochs");
  evaluate->add_option("--lr-rate", ea.lr_rate, "Logistic regression step size");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Render machine reports as a comparison table");
  report->add_option("--inputs", ra.inputs, "Machine report files")->required();
  report->add_option("--out", ra.out, "Table output file");
  report->add_flag("!--no-published", ra.published, "Omit the published comparison rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "scgnet: " << (argc <= 1 ? std::string("a subcommand is required") : e.what()) << "\n\n" << app.help();
    return 1;
  }

  std::vector<std::string> args(argv, argv + argc);
  auto* sub = app.get_subcommands().front();
  try {
    Run run(sub->get_name(), g, args, err);
    if (sub == ingest) return cmd_ingest(run, ia, out);
    if (sub == preprocess) return cmd_preprocess(run, pa, out);
    if (sub == train) return cmd_train(run, ta, out);
    if (sub == cv) return cmd_cv(run, ta, out);
    if (sub == tune) return cmd_tune(run, ta, out);
    if (sub == evaluate) return cmd_evaluate(run, ea, out);
    return cmd_report(run, ra, out);
  } catch (const Error& e) {
    err << "scgnet " << sub->get_name() << ": " << errc_name(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "scgnet " << sub->get_name() << ": " << e.what() << "\n";
    return 3;
  }
}

}  // namespace scgnet::cli
