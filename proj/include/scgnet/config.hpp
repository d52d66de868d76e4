#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "scgnet/dataset.hpp"
#include "scgnet/error.hpp"
#include "scgnet/ini.hpp"
#include "scgnet/io.hpp"
#include "scgnet/model.hpp"
#include "scgnet/train.hpp"
#include "scgnet/tune.hpp"

namespace scgnet::config {

enum class SearchMethod { Hyperband, Random };

inline const char* method_name(SearchMethod m) { return m == SearchMethod::Hyperband ? "hyperband" : "random"; }

struct TuneConfig {
  SearchMethod method = SearchMethod::Hyperband;
  std::uint64_t max_epochs = 27;  // R
  std::uint64_t eta = 3;
  /// Random search only.
  std::size_t trials = 20;
  std::uint64_t trial_epochs = 10;
  double holdout = 0.2;
  /// Top configurations re-scored with full k-fold CV after the search.
  std::size_t final_cv_top = 3;
  tune::SearchSpace space;

  void validate() const {
    ini::require(max_epochs >= 1, "tune.max_epochs", "must be >= 1");
    ini::require(eta >= 2, "tune.eta", "must be >= 2");
    ini::require(trials >= 1, "tune.trials", "must be >= 1");
    ini::require(trial_epochs >= 1, "tune.trial_epochs", "must be >= 1");
    ini::require(holdout > 0.0 && holdout < 1.0, "tune.holdout", "must be in (0, 1)");
    ini::require(space.cardinality() > 0, "tune.kernels", "every search axis needs at least one value");
  }
};

enum class SmoteMode { Auto, On, Off };

struct SmoteSection {
  /// Auto balances the multiclass task only.
  SmoteMode mode = SmoteMode::Auto;
  int k_neighbors = 5;

  bool enabled_for(model::Task t) const {
    return mode == SmoteMode::On || (mode == SmoteMode::Auto && t == model::Task::Multiclass);
  }
};

struct DataSection {
  std::string train;
  std::string test;
  std::string taxonomy = "data/attack_taxonomy.tsv";
  bool coerce_unknown = false;
  /// Stratified hold-out used for early stopping by `train`.
  double val_fraction = 0.1;
};

struct RunConfig {
  model::Task task = model::Task::Binary;
  std::uint64_t seed = 0;
  model::ScgnetConfig model = model::paper_default_config(model::Task::Binary);
  train::TrainConfig train;
  TuneConfig tune;
  SmoteSection smote;
  DataSection data;
};

inline const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"task", "seed"}},
      {"model", model::model_keys()},
      {"train", train::train_keys()},
      {"tune",
       {"method", "max_epochs", "eta", "trials", "trial_epochs", "holdout", "final_cv_top", "kernels", "kernel_sizes",
        "dropouts", "conv_blocks", "gru_units", "gru_blocks", "activations"}},
      {"smote", {"enabled", "k_neighbors"}},
      {"data", {"train", "test", "taxonomy", "coerce_unknown", "val_fraction"}}};
  return keys;
}

namespace detail {

inline std::vector<nn::ActivationKind> parse_activations(const std::string& raw) {
  std::vector<nn::ActivationKind> out;
  for (const auto& s : ini::parse_list<std::string>(raw, "tune.activations")) {
    out.push_back(model::parse_hidden_activation(s));
  }
  return out;
}

inline SmoteMode parse_smote_mode(const std::string& raw) {
  const auto s = ini::trim(raw);
  if (s == "auto") return SmoteMode::Auto;
  return ini::parse_value<bool>(s, "smote.enabled") ? SmoteMode::On : SmoteMode::Off;
}

}  // namespace detail

/// "section.key=value" assignments applied on top of the file.
using Overrides = std::vector<std::pair<std::string, std::string>>;

inline std::pair<std::string, std::string> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || s.find('.') > eq) {
    throw Error(Errc::TypeError, "override '" + s + "' must look like section.key=value");
  }
  return {ini::trim(s.substr(0, eq)), ini::trim(s.substr(eq + 1))};
}

inline RunConfig from_tree(const ini::Tree& tree) {
  ini::check_keys(tree, allowed_keys());
  RunConfig c;
  if (auto t = tree.get_optional<std::string>("run.task")) c.task = model::parse_task(ini::trim(*t));
  c.seed = ini::get(tree, "run.seed", c.seed);

  auto base = model::paper_default_config(c.task);
  c.model = model::model_from_tree(tree, base);
  if (c.model.task() != c.task) {
    throw Error(Errc::TypeError, std::string("model.head: '") + model::task_name(c.model.task()) +
                                     "' disagrees with run.task '" + model::task_name(c.task) + "'");
  }
  c.train = train::train_from_tree(tree, c.train);

  auto& t = c.tune;
  if (auto m = tree.get_optional<std::string>("tune.method")) {
    const auto s = ini::trim(*m);
    if (s == "hyperband") {
      t.method = SearchMethod::Hyperband;
    } else if (s == "random") {
      t.method = SearchMethod::Random;
    } else {
      throw Error(Errc::TypeError, "tune.method must be hyperband or random, got '" + s + "'");
    }
  }
  t.max_epochs = ini::get(tree, "tune.max_epochs", t.max_epochs);
  t.eta = ini::get(tree, "tune.eta", t.eta);
  t.trials = ini::get(tree, "tune.trials", t.trials);
  t.trial_epochs = ini::get(tree, "tune.trial_epochs", t.trial_epochs);
  t.holdout = ini::get(tree, "tune.holdout", t.holdout);
  t.final_cv_top = ini::get(tree, "tune.final_cv_top", t.final_cv_top);
  t.space.kernels = ini::get_list(tree, "tune.kernels", t.space.kernels);
  t.space.kernel_size = ini::get_list(tree, "tune.kernel_sizes", t.space.kernel_size);
  t.space.dropout = ini::get_list(tree, "tune.dropouts", t.space.dropout);
  t.space.conv_blocks = ini::get_list(tree, "tune.conv_blocks", t.space.conv_blocks);
  t.space.gru_units = ini::get_list(tree, "tune.gru_units", t.space.gru_units);
  t.space.gru_blocks = ini::get_list(tree, "tune.gru_blocks", t.space.gru_blocks);
  if (auto a = tree.get_optional<std::string>("tune.activations")) t.space.activation = detail::parse_activations(*a);
  t.validate();

  if (auto e = tree.get_optional<std::string>("smote.enabled")) c.smote.mode = detail::parse_smote_mode(*e);
  c.smote.k_neighbors = ini::get(tree, "smote.k_neighbors", c.smote.k_neighbors);
  ini::require(c.smote.k_neighbors >= 1, "smote.k_neighbors", "must be >= 1");

  c.data.train = ini::get<std::string>(tree, "data.train", c.data.train);
  c.data.test = ini::get<std::string>(tree, "data.test", c.data.test);
  c.data.taxonomy = ini::get<std::string>(tree, "data.taxonomy", c.data.taxonomy);
  c.data.coerce_unknown = ini::get(tree, "data.coerce_unknown", c.data.coerce_unknown);
  c.data.val_fraction = ini::get(tree, "data.val_fraction", c.data.val_fraction);
  ini::require(c.data.val_fraction > 0.0 && c.data.val_fraction < 1.0, "data.val_fraction", "must be in (0, 1)");
  return c;
}

inline RunConfig parse_config(const std::string& text, const Overrides& overrides = {},
                              const std::string& source = "<config>") {
  auto tree = ini::parse(text, source);
  for (const auto& [key, value] : overrides) tree.put(key, value);
  return from_tree(tree);
}

inline RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {}) {
  if (!std::filesystem::is_regular_file(path)) throw Error(Errc::MissingFile, "config file not found: " + path.string());
  return parse_config(io::read_text(path), overrides, path.string());
}

/// Complete config document; parse_config(to_ini(c)) == c.
inline std::string to_ini(const RunConfig& c) {
  std::string s = "[run]\n";
  s += std::string("task = ") + model::task_name(c.task) + "\n";
  s += "seed = " + ini::format_value(c.seed) + "\n\n";
  s += model::to_ini(c.model) + "\n";
  s += train::to_ini(c.train) + "\n";
  const auto& t = c.tune;
  std::vector<std::string> acts;
  for (auto a : t.space.activation) acts.push_back(nn::activation_name(a));
  s += "[tune]\n";
  s += std::string("method = ") + method_name(t.method) + "\n";
  s += "max_epochs = " + ini::format_value(t.max_epochs) + "\n";
  s += "eta = " + ini::format_value(t.eta) + "\n";
  s += "trials = " + ini::format_value(t.trials) + "\n";
  s += "trial_epochs = " + ini::format_value(t.trial_epochs) + "\n";
  s += "holdout = " + ini::format_value(t.holdout) + "\n";
  s += "final_cv_top = " + ini::format_value(t.final_cv_top) + "\n";
  s += "kernels = " + ini::format_list(t.space.kernels) + "\n";
  s += "kernel_sizes = " + ini::format_list(t.space.kernel_size) + "\n";
  s += "dropouts = " + ini::format_list(t.space.dropout) + "\n";
  s += "conv_blocks = " + ini::format_list(t.space.conv_blocks) + "\n";
  s += "gru_units = " + ini::format_list(t.space.gru_units) + "\n";
  s += "gru_blocks = " + ini::format_list(t.space.gru_blocks) + "\n";
  s += "activations = " + ini::format_list(acts) + "\n\n";
  s += "[smote]\n";
  s += std::string("enabled = ") +
       (c.smote.mode == SmoteMode::Auto ? "auto" : c.smote.mode == SmoteMode::On ? "true" : "false") + "\n";
  s += "k_neighbors = " + ini::format_value(c.smote.k_neighbors) + "\n\n";
  s += "[data]\n";
  s += "train = " + c.data.train + "\n";
  s += "test = " + c.data.test + "\n";
  s += "taxonomy = " + c.data.taxonomy + "\n";
  s += "coerce_unknown = " + ini::format_value(c.data.coerce_unknown) + "\n";
  s += "val_fraction = " + ini::format_value(c.data.val_fraction) + "\n";
  return s;
}

}  // namespace scgnet::config
