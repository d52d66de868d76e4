#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnet/error.hpp"
#include "scgnet/ini.hpp"
#include "scgnet/matrix.hpp"
#include "scgnet/model.hpp"
#include "scgnet/nn/loss.hpp"
#include "scgnet/optim.hpp"
#include "scgnet/rng.hpp"

namespace scgnet::train {

using nn::Mode;
using nn::Tensor;

enum class Monitor { ValLoss, ValAccuracy };

inline const char* monitor_name(Monitor m) { return m == Monitor::ValLoss ? "val_loss" : "val_accuracy"; }

inline Monitor parse_monitor(const std::string& s) {
  if (s == "val_loss") return Monitor::ValLoss;
  if (s == "val_accuracy") return Monitor::ValAccuracy;
  throw Error(Errc::TypeError, "train.monitor must be val_loss or val_accuracy, got '" + s + "'");
}

struct TrainConfig {
  std::uint64_t epochs = 500;
  std::size_t batch_size = 256;
  double lr0 = 0.01;
  double decay_rate = 0.96;
  std::uint64_t patience = 15;
  std::size_t k_folds = 5;
  std::uint64_t seed = 0;
  Monitor monitor = Monitor::ValLoss;
  /// Stop once training accuracy (Eval mode) reaches this value; 0 disables.
  double target_train_accuracy = 0.0;
  /// Allow classes with fewer than k members in k-fold splits (warning only).
  bool clamp_folds = true;

  void validate() const {
    ini::require(epochs >= 1, "train.epochs", "must be >= 1");
    ini::require(batch_size >= 1, "train.batch_size", "must be >= 1");
    ini::require(lr0 > 0.0, "train.lr0", "must be > 0");
    ini::require(decay_rate > 0.0 && decay_rate <= 1.0, "train.decay_rate", "must be in (0, 1]");
    ini::require(patience >= 1, "train.patience", "must be >= 1");
    ini::require(k_folds >= 2, "train.k_folds", "must be >= 2");
    ini::require(target_train_accuracy >= 0.0 && target_train_accuracy <= 1.0, "train.target_train_accuracy",
                 "must be in [0, 1]");
  }

  bool operator==(const TrainConfig&) const = default;
};

inline const std::set<std::string>& train_keys() {
  static const std::set<std::string> keys{"epochs",  "batch_size", "lr0",     "decay_rate",
                                          "patience", "k_folds",    "monitor", "target_train_accuracy",
                                          "clamp_folds"};
  return keys;
}

inline TrainConfig train_from_tree(const ini::Tree& tree, TrainConfig c) {
  c.epochs = ini::get(tree, "train.epochs", c.epochs);
  c.batch_size = ini::get(tree, "train.batch_size", c.batch_size);
  c.lr0 = ini::get(tree, "train.lr0", c.lr0);
  c.decay_rate = ini::get(tree, "train.decay_rate", c.decay_rate);
  c.patience = ini::get(tree, "train.patience", c.patience);
  c.k_folds = ini::get(tree, "train.k_folds", c.k_folds);
  if (auto m = tree.get_optional<std::string>("train.monitor")) c.monitor = parse_monitor(ini::trim(*m));
  c.target_train_accuracy = ini::get(tree, "train.target_train_accuracy", c.target_train_accuracy);
  c.clamp_folds = ini::get(tree, "train.clamp_folds", c.clamp_folds);
  c.validate();
  return c;
}

inline std::string to_ini(const TrainConfig& c) {
  std::string s = "[train]\n";
  auto line = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
  line("epochs", ini::format_value(c.epochs));
  line("batch_size", ini::format_value(c.batch_size));
  line("lr0", ini::format_value(c.lr0));
  line("decay_rate", ini::format_value(c.decay_rate));
  line("patience", ini::format_value(c.patience));
  line("k_folds", ini::format_value(c.k_folds));
  line("monitor", monitor_name(c.monitor));
  line("target_train_accuracy", ini::format_value(c.target_train_accuracy));
  line("clamp_folds", ini::format_value(c.clamp_folds));
  return s;
}

inline double lr_at(const TrainConfig& c, std::uint64_t epoch) { return optim::lr_at(c.lr0, c.decay_rate, epoch); }

// ---------------------------------------------------------------------------

struct Batch {
  Tensor<float> x;
  Tensor<float> target;
};

/// Rows `idx` of `set` as model input plus targets: a [B, 1] column of 0/1
/// for a width-1 head, one-hot rows otherwise.
inline Batch make_batch(const EncodedSet& set, std::span<const std::size_t> idx, std::size_t head_width) {
  Batch b{Tensor<float>({idx.size(), set.x.cols}), Tensor<float>({idx.size(), head_width})};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto row = set.x.row(idx[i]);
    std::copy(row.begin(), row.end(), b.x.data() + i * set.x.cols);
    const int y = set.y[idx[i]];
    const int limit = head_width == 1 ? 2 : static_cast<int>(head_width);
    if (y < 0 || y >= limit) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(y) + " for head width " +
                                                                    std::to_string(head_width));
    if (head_width == 1) {
      b.target[i] = static_cast<float>(y);
    } else {
      b.target[i * head_width + static_cast<std::size_t>(y)] = 1.0f;
    }
  }
  return b;
}

inline nn::LossKind loss_kind(std::size_t head_width) {
  return head_width == 1 ? nn::LossKind::BinaryCrossEntropy : nn::LossKind::CategoricalCrossEntropy;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
  /// Probabilities, row-major [rows, head width].
  std::vector<float> probabilities;
};

/// Eval-mode pass over `set` in batches.
inline Evaluation evaluate(model::Model<float>& m, const EncodedSet& set, std::size_t batch_size = 256,
                           double threshold = 0.5) {
  Evaluation ev;
  const std::size_t n = set.size();
  const std::size_t w = m.config().head_width();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t len = std::min(batch_size, n - start);
    const auto b = make_batch(set, std::span(idx).subspan(start, len), w);
    const auto p = m.forward(b.x, Mode::Eval);
    loss_sum += nn::loss(p, b.target, loss_kind(w)).value * static_cast<double>(len);
    const auto pred = model::predict(p, threshold);
    for (std::size_t i = 0; i < len; ++i) correct += pred[i] == set.y[start + i];
    ev.predictions.insert(ev.predictions.end(), pred.begin(), pred.end());
    ev.probabilities.insert(ev.probabilities.end(), p.values.begin(), p.values.end());
  }
  if (n > 0) {
    ev.loss = loss_sum / static_cast<double>(n);
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  }
  return ev;
}

/// Mini-batch Adam training that can stop after any epoch and resume from
/// its TrainingState. Epoch e shuffles with a stream seeded by (seed, e) and
/// uses learning rate lr0 * decay^e; dropout masks are keyed on (e, batch).
class Trainer {
 public:
  Trainer(model::Model<float>& m, const EncodedSet& train, TrainConfig cfg, model::TrainingState state = {})
      : model_(m), train_(train), cfg_(std::move(cfg)), state_(std::move(state)) {
    cfg_.validate();
    if (train_.size() == 0) throw Error(Errc::EmptyTrainingSet, "no training rows");
    if (train_.x.cols != m.config().input_length) {
      throw Error(Errc::ShapeMismatch, "training width " + std::to_string(train_.x.cols) + " vs model input " +
                                           std::to_string(m.config().input_length));
    }
    if (state_.adam.m.empty()) state_.adam = optim::make_adam_state(model_.params());
  }

  std::uint64_t epochs_done() const { return state_.epochs_done; }
  const model::TrainingState& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }

  /// One pass over the training set; returns the mean training loss.
  double run_epoch() {
    const std::uint64_t epoch = state_.epochs_done;
    const double lr = lr_at(cfg_, epoch);
    const std::size_t n = train_.size();
    const std::size_t w = model_.config().head_width();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg_.seed, epoch));
    rng.shuffle(order);
    auto params = model_.params();
    double loss_sum = 0.0;
    std::uint64_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += cfg_.batch_size, ++batch_no) {
      const std::size_t len = std::min(cfg_.batch_size, n - start);
      const auto b = make_batch(train_, std::span(order).subspan(start, len), w);
      model_.set_step((epoch << 32) | batch_no);
      model_.zero_grad();
      const auto p = model_.forward(b.x, Mode::Train);
      const double loss = nn::loss(p, b.target, loss_kind(w)).value;
      if (!std::isfinite(loss)) {
        throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) +
                                             " lr " + ini::format_double(lr));
      }
      loss_sum += loss * static_cast<double>(len);
      model_.backward_logits(nn::logit_gradient(p, b.target));
      optim::adam_step(params, state_.adam, lr);
    }
    ++state_.epochs_done;
    return loss_sum / static_cast<double>(n);
  }

 private:
  model::Model<float>& model_;
  const EncodedSet& train_;
  TrainConfig cfg_;
  model::TrainingState state_;
};

struct FoldHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  std::vector<double> lr;
  /// 0-based epoch whose weights were kept.
  std::size_t best_epoch = 0;
  /// "patience", "max_epochs" or "target_accuracy".
  std::string stop_reason;
  /// Name of the monitored series ("val_loss", "val_accuracy", or
  /// "train_loss" when no validation set was given).
  std::string monitor;

  std::size_t epochs_run() const { return train_loss.size(); }

  nlohmann::ordered_json to_json() const {
    return {{"epochs_run", epochs_run()}, {"best_epoch", best_epoch}, {"stop_reason", stop_reason},
            {"monitor", monitor},         {"train_loss", train_loss}, {"val_loss", val_loss},
            {"val_accuracy", val_accuracy}, {"lr", lr}};
  }
};

/// Early-stopping bookkeeping: strict improvement resets the wait counter.
class EarlyStopping {
 public:
  EarlyStopping(std::uint64_t patience, bool lower_is_better) : patience_(patience), lower_(lower_is_better) {}

  /// Records an epoch's monitor value; returns true if it is the new best.
  bool update(double value) {
    const bool better = !best_ || (lower_ ? value < *best_ : value > *best_);
    if (better) {
      best_ = value;
      wait_ = 0;
    } else {
      ++wait_;
    }
    return better;
  }

  bool should_stop() const { return wait_ >= patience_; }
  std::optional<double> best() const { return best_; }

 private:
  std::uint64_t patience_;
  bool lower_;
  std::optional<double> best_;
  std::uint64_t wait_ = 0;
};

/// Trains with early stopping on the monitor and restores the best epoch's
/// weights. Without a validation set the training loss is monitored.
inline FoldHistory train_model(model::Model<float>& m, const EncodedSet& train, const EncodedSet* val,
                               const TrainConfig& cfg) {
  Trainer trainer(m, train, cfg);
  FoldHistory h;
  const bool use_val = val && val->size() > 0;
  const bool lower = !use_val || cfg.monitor == Monitor::ValLoss;
  h.monitor = use_val ? monitor_name(cfg.monitor) : "train_loss";
  EarlyStopping stopper(cfg.patience, lower);
  std::vector<std::vector<float>> best;
  h.stop_reason = "max_epochs";
  for (std::uint64_t e = 0; e < cfg.epochs; ++e) {
    h.lr.push_back(lr_at(cfg, e));
    h.train_loss.push_back(trainer.run_epoch());
    double monitor = h.train_loss.back();
    if (use_val) {
      const auto ev = evaluate(m, *val, cfg.batch_size);
      h.val_loss.push_back(ev.loss);
      h.val_accuracy.push_back(ev.accuracy);
      monitor = cfg.monitor == Monitor::ValLoss ? ev.loss : ev.accuracy;
    }
    if (stopper.update(monitor)) {
      h.best_epoch = e;
      best = m.snapshot();
    }
    if (cfg.target_train_accuracy > 0.0 && evaluate(m, train, cfg.batch_size).accuracy >= cfg.target_train_accuracy) {
      h.stop_reason = "target_accuracy";
      break;
    }
    if (stopper.should_stop()) {
      h.stop_reason = "patience";
      break;
    }
  }
  if (h.stop_reason != "target_accuracy") m.restore(best);
  else h.best_epoch = h.epochs_run() - 1;
  return h;
}

// ---------------------------------------------------------------------------

struct Folds {
  /// Sorted row indices of each fold.
  std::vector<std::vector<std::size_t>> folds;
  std::vector<std::string> warnings;
};

/// Stratified k-fold split. Members of each class are shuffled with a stream
/// seeded by (seed, class) and dealt round-robin, continuing from the fold
/// where the previous class stopped, so per-class fold counts differ by at
/// most one and fold sizes stay balanced. A class with fewer than k members
/// is a DegenerateClass error unless `clamp` is set, in which case it lands
/// in fewer than k folds and a warning is recorded.
inline Folds stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed, bool clamp = true) {
  if (k < 2) throw Error(Errc::TypeError, "k_folds must be >= 2");
  Folds out;
  out.folds.resize(k);
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::size_t next = 0;
  for (auto& [cls, members] : by_class) {
    if (members.size() < k) {
      const std::string msg =
          "class " + std::to_string(cls) + " has " + std::to_string(members.size()) + " members for k=" + std::to_string(k);
      if (!clamp) throw Error(Errc::DegenerateClass, msg);
      out.warnings.push_back(msg + "; it is absent from some folds");
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(cls))));
    rng.shuffle(members);
    for (auto i : members) {
      out.folds[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  for (auto& f : out.folds) std::sort(f.begin(), f.end());
  return out;
}

/// Indices outside fold `f`, sorted.
inline std::vector<std::size_t> complement(const Folds& folds, std::size_t f) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < folds.folds.size(); ++i) {
    if (i != f) out.insert(out.end(), folds.folds[i].begin(), folds.folds[i].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Holdout {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Stratified holdout: round(fraction * class size) members of each class
/// (shuffled by (seed, class)) go to validation.
inline Holdout stratified_holdout(std::span<const int> labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(Errc::TypeError, "holdout fraction must be in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Holdout h;
  for (auto& [cls, members] : by_class) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(cls))));
    rng.shuffle(members);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    h.val.insert(h.val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    h.train.insert(h.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(h.train.begin(), h.train.end());
  std::sort(h.val.begin(), h.val.end());
  return h;
}

/// CRC-32 over every parameter and buffer in build order.
inline std::uint32_t weight_checksum(model::Model<float>& m) {
  io::Writer w;
  for (const auto& v : m.snapshot()) w.put_array(std::span<const float>(v));
  return io::crc32(w.bytes());
}

}  // namespace scgnet::train
