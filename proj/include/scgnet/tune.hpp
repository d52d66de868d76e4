#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scgnet/cv.hpp"
#include "scgnet/error.hpp"
#include "scgnet/model.hpp"
#include "scgnet/rng.hpp"
#include "scgnet/smote.hpp"
#include "scgnet/train.hpp"

namespace scgnet::tune {

/// One value list per architecture axis.
struct SearchSpace {
  std::vector<std::size_t> kernels{32, 64, 128};
  std::vector<std::size_t> kernel_size{2, 5, 7};
  std::vector<double> dropout{0.2, 0.4, 0.5};
  std::vector<std::size_t> conv_blocks{1, 2, 3, 4};
  std::vector<std::size_t> gru_units{100, 200, 300};
  std::vector<std::size_t> gru_blocks{1, 2, 3, 4};
  std::vector<nn::ActivationKind> activation{nn::ActivationKind::Relu, nn::ActivationKind::Elu,
                                             nn::ActivationKind::Relu6};

  std::size_t cardinality() const {
    return kernels.size() * kernel_size.size() * dropout.size() * conv_blocks.size() * gru_units.size() *
           gru_blocks.size() * activation.size();
  }
};

struct TrialConfig {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  std::size_t kernels = 32;
  std::size_t kernel_size = 2;
  double dropout = 0.2;
  std::size_t conv_blocks = 1;
  std::size_t gru_units = 100;
  std::size_t gru_blocks = 1;
  nn::ActivationKind activation = nn::ActivationKind::Relu;

  bool same_point(const TrialConfig& o) const {
    return kernels == o.kernels && kernel_size == o.kernel_size && dropout == o.dropout &&
           conv_blocks == o.conv_blocks && gru_units == o.gru_units && gru_blocks == o.gru_blocks &&
           activation == o.activation;
  }

  /// Every conv block gets (kernels, kernel_size, dropout), every GRU block
  /// (gru_units, dropout); the remaining fields come from `base`.
  model::ScgnetConfig to_model(const model::ScgnetConfig& base) const {
    auto c = base;
    c.conv_blocks.assign(conv_blocks, {kernels, kernel_size, dropout});
    c.gru_blocks.assign(gru_blocks, {gru_units, dropout});
    c.activation = activation;
    c.seed = seed;
    return c;
  }

  nlohmann::ordered_json to_json() const {
    return {{"id", id},
            {"seed", seed},
            {"kernels", kernels},
            {"kernel_size", kernel_size},
            {"dropout", dropout},
            {"conv_blocks", conv_blocks},
            {"gru_units", gru_units},
            {"gru_blocks", gru_blocks},
            {"activation", nn::activation_name(activation)}};
  }
};

/// Conv/pool length chain for `blocks` convs of width `k` from `length`;
/// ShapeUnderflow when a conv sees fewer than k steps or a pool fewer than 2.
inline std::vector<std::size_t> conv_chain(std::size_t length, std::size_t blocks, std::size_t k) {
  std::vector<std::size_t> out{length};
  for (std::size_t b = 0; b < blocks; ++b) {
    if (length < k) throw Error(Errc::ShapeUnderflow, "conv kernel " + std::to_string(k) + " on length " +
                                                          std::to_string(length));
    length = length - k + 1;
    out.push_back(length);
    if (length < 2) throw Error(Errc::ShapeUnderflow, "pool on length " + std::to_string(length));
    length /= 2;
    out.push_back(length);
  }
  return out;
}

inline bool fits(const TrialConfig& t, std::size_t input_length) {
  try {
    conv_chain(input_length, t.conv_blocks, t.kernel_size);
    return true;
  } catch (const Error&) {
    return false;
  }
}

inline constexpr std::size_t kMaxRetries = 100;

/// Independent uniform draw per axis, in the order kernels, kernel_size,
/// dropout, conv_blocks, gru_units, gru_blocks, activation; points that
/// underflow `input_length` are redrawn up to `max_retries` times.
inline TrialConfig sample(const SearchSpace& space, Rng& rng, std::size_t input_length,
                          std::size_t max_retries = kMaxRetries) {
  auto pick = [&](const auto& axis) {
    if (axis.empty()) throw Error(Errc::TypeError, "search space axis is empty");
    return axis[rng.below(axis.size())];
  };
  for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
    TrialConfig t;
    t.kernels = pick(space.kernels);
    t.kernel_size = pick(space.kernel_size);
    t.dropout = pick(space.dropout);
    t.conv_blocks = pick(space.conv_blocks);
    t.gru_units = pick(space.gru_units);
    t.gru_blocks = pick(space.gru_blocks);
    t.activation = pick(space.activation);
    if (fits(t, input_length)) return t;
  }
  throw Error(Errc::ExhaustedRetries, "no configuration fits input length " + std::to_string(input_length) +
                                          " after " + std::to_string(max_retries) + " retries");
}

// ---------------------------------------------------------------------------

struct TrialResult {
  bool ok = false;
  double val_accuracy = -std::numeric_limits<double>::infinity();
  double val_loss = std::numeric_limits<double>::infinity();
  std::uint64_t epochs = 0;
  std::string error;
};

struct ScoredTrial {
  TrialConfig trial;
  TrialResult result;
};

/// Descending validation accuracy, then ascending validation loss, then
/// ascending trial id. Failed trials sort last.
inline bool ranks_before(const ScoredTrial& a, const ScoredTrial& b) {
  if (a.result.ok != b.result.ok) return a.result.ok;
  if (a.result.val_accuracy != b.result.val_accuracy) return a.result.val_accuracy > b.result.val_accuracy;
  if (a.result.val_loss != b.result.val_loss) return a.result.val_loss < b.result.val_loss;
  return a.trial.id < b.trial.id;
}

inline void rank(std::vector<ScoredTrial>& v) { std::sort(v.begin(), v.end(), ranks_before); }

/// One line of the bracket log.
struct LogEntry {
  long bracket = -1;  // -1 for random search
  std::size_t round = 0;
  std::uint64_t trial = 0;
  std::uint64_t epochs = 0;
  TrialResult result;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j{{"bracket", bracket}, {"round", round},       {"trial", trial},
                             {"epochs", epochs},   {"ok", result.ok}};
    if (result.ok) {
      j["val_accuracy"] = result.val_accuracy;
      j["val_loss"] = result.val_loss;
    } else {
      j["error"] = result.error;
    }
    return j;
  }
};

using LogSink = std::function<void(const LogEntry&)>;

/// Runs the evaluator, turning thrown errors into a failed result.
template <class Evaluator>
TrialResult run_trial(Evaluator& ev, const TrialConfig& t, std::uint64_t epochs) {
  try {
    auto r = ev.run(t, epochs);
    r.ok = true;
    r.epochs = epochs;
    return r;
  } catch (const std::exception& e) {
    TrialResult r;
    r.error = e.what();
    r.epochs = epochs;
    return r;
  }
}

struct SearchResult {
  std::vector<ScoredTrial> ranked;
  std::vector<LogEntry> log;
  std::size_t failures = 0;

  const ScoredTrial& best() const { return ranked.front(); }
};

/// `n_trials` sampled configurations, each trained for `epochs`.
template <class Evaluator>
SearchResult random_search(const SearchSpace& space, std::size_t n_trials, std::uint64_t epochs, Evaluator& ev,
                           std::uint64_t seed, std::size_t input_length, const LogSink& sink = {}) {
  if (n_trials < 1) throw Error(Errc::TypeError, "tune.n_trials must be >= 1");
  Rng rng(derive_seed(seed, 0x5e));
  SearchResult out;
  for (std::size_t i = 0; i < n_trials; ++i) {
    auto t = sample(space, rng, input_length);
    t.id = i;
    t.seed = derive_seed(seed, 0x7000 + i);
    ScoredTrial st{t, run_trial(ev, t, epochs)};
    LogEntry e{-1, 0, t.id, epochs, st.result};
    out.log.push_back(e);
    if (sink) sink(e);
    out.failures += st.result.ok ? 0 : 1;
    out.ranked.push_back(st);
  }
  rank(out.ranked);
  if (out.failures == out.ranked.size()) throw Error(Errc::AllTrialsFailed, "every random-search trial failed");
  return out;
}

// ---------------------------------------------------------------------------
// Hyperband

struct Bracket {
  std::size_t s = 0;
  std::size_t n = 0;
  double r = 0.0;
};

inline std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t v = 1;
  while (e--) v *= b;
  return v;
}

/// s_max = floor(log_eta R), computed in integers.
inline std::size_t s_max_of(std::uint64_t R, std::uint64_t eta) {
  std::size_t s = 0;
  while (ipow(eta, s + 1) <= R) ++s;
  return s;
}

/// Brackets s = s_max..0 with n = ceil((s_max+1) eta^s / (s+1)) and
/// r = R eta^-s.
inline std::vector<Bracket> hyperband_schedule(std::uint64_t R, std::uint64_t eta) {
  if (R < 1) throw Error(Errc::TypeError, "tune.max_resource must be >= 1");
  if (eta < 2) throw Error(Errc::TypeError, "tune.eta must be >= 2");
  const std::size_t smax = s_max_of(R, eta);
  std::vector<Bracket> out;
  for (std::size_t s = smax + 1; s-- > 0;) {
    const std::uint64_t num = (smax + 1) * ipow(eta, s);
    const std::size_t n = static_cast<std::size_t>((num + s) / (s + 1));
    out.push_back({s, n, static_cast<double>(R) / static_cast<double>(ipow(eta, s))});
  }
  return out;
}

/// Total epochs a round of successive halving trains each survivor to:
/// round(r0 eta^i), at least 1.
inline std::uint64_t round_epochs(double r0, std::uint64_t eta, std::size_t round) {
  const double r = r0 * static_cast<double>(ipow(eta, round));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(r)));
}

struct HalvingResult {
  /// Trial ids alive at the start of each round.
  std::vector<std::vector<std::uint64_t>> survivors;
  std::vector<ScoredTrial> final_round;
  std::uint64_t epochs_consumed = 0;

  const ScoredTrial& best() const { return final_round.front(); }
};

/// Successive halving: round i trains every survivor to round_epochs(r0,
/// eta, i) total epochs (the evaluator resumes from its checkpoint), ranks
/// them, and keeps the best max(1, floor(n_i / eta)). Stops when one
/// survivor is left or after `max_rounds` rounds.
template <class Evaluator>
HalvingResult successive_halving(std::vector<TrialConfig> configs, double r0, std::uint64_t eta, Evaluator& ev,
                                 std::size_t max_rounds = std::numeric_limits<std::size_t>::max(), long bracket = -1,
                                 std::vector<LogEntry>* log = nullptr, const LogSink& sink = {}) {
  if (configs.empty()) throw Error(Errc::TypeError, "successive halving needs at least one configuration");
  HalvingResult out;
  std::map<std::uint64_t, std::uint64_t> trained;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    std::vector<std::uint64_t> ids;
    for (const auto& c : configs) ids.push_back(c.id);
    out.survivors.push_back(ids);
    const std::uint64_t epochs = round_epochs(r0, eta, round);
    std::vector<ScoredTrial> scored;
    for (const auto& c : configs) {
      auto res = run_trial(ev, c, epochs);
      out.epochs_consumed += epochs - std::min(epochs, trained[c.id]);
      trained[c.id] = epochs;
      LogEntry e{bracket, round, c.id, epochs, res};
      if (log) log->push_back(e);
      if (sink) sink(e);
      scored.push_back({c, res});
    }
    rank(scored);
    out.final_round = scored;
    const std::size_t keep = std::max<std::size_t>(1, configs.size() / eta);
    if (configs.size() == 1 || round + 1 == max_rounds) break;
    configs.clear();
    for (std::size_t i = 0; i < keep; ++i) configs.push_back(scored[i].trial);
  }
  return out;
}

struct BracketReport {
  Bracket bracket;
  HalvingResult halving;
  /// B = (s_max + 1) * R, the closed-form budget of every bracket.
  std::uint64_t budget = 0;
};

struct HyperbandResult {
  std::vector<BracketReport> brackets;
  std::vector<LogEntry> log;
  ScoredTrial best;
};

/// Hyperband over `space`: each bracket samples its n configurations (ids
/// continue across brackets) and runs successive halving for s + 1 rounds.
/// The best configuration is the top of the final-round rankings pooled
/// over all brackets.
template <class Evaluator>
HyperbandResult hyperband(const SearchSpace& space, std::uint64_t R, std::uint64_t eta, Evaluator& ev,
                          std::uint64_t seed, std::size_t input_length, const LogSink& sink = {}) {
  HyperbandResult out;
  Rng rng(derive_seed(seed, 0x4b));
  std::uint64_t next_id = 0;
  std::vector<ScoredTrial> finalists;
  const std::uint64_t B = (s_max_of(R, eta) + 1) * R;
  for (const auto& b : hyperband_schedule(R, eta)) {
    std::vector<TrialConfig> configs;
    for (std::size_t i = 0; i < b.n; ++i) {
      auto t = sample(space, rng, input_length);
      t.id = next_id++;
      t.seed = derive_seed(seed, 0x7000 + t.id);
      configs.push_back(t);
    }
    BracketReport br{b, successive_halving(std::move(configs), b.r, eta, ev, b.s + 1, static_cast<long>(b.s),
                                           &out.log, sink),
                     B};
    finalists.push_back(br.halving.best());
    out.brackets.push_back(std::move(br));
  }
  rank(finalists);
  if (!finalists.front().result.ok) throw Error(Errc::AllTrialsFailed, "every hyperband trial failed");
  out.best = finalists.front();
  return out;
}

// ---------------------------------------------------------------------------

/// Trains trials on a fixed stratified train/validation split and keeps an
/// in-memory checkpoint (weights, Adam state, epochs done) per trial so a
/// later, longer request resumes instead of restarting. Training runs for
/// the requested epoch count with no early stopping.
class TrainingEvaluator {
 public:
  TrainingEvaluator(EncodedSet train, EncodedSet val, model::ScgnetConfig base, train::TrainConfig tcfg,
                    train::SmoteOptions smote_opts = {})
      : val_(std::move(val)), base_(std::move(base)), tcfg_(std::move(tcfg)) {
    if (smote_opts.enabled) {
      auto bal = smote::balance_classes(train, smote_opts.config);
      train_ = std::move(bal.data);
    } else {
      train_ = std::move(train);
    }
  }

  TrialResult run(const TrialConfig& t, std::uint64_t epochs) {
    std::unique_ptr<model::Model<float>> m;
    model::TrainingState state;
    if (auto it = checkpoints_.find(t.id); it != checkpoints_.end()) {
      auto loaded = model::decode_weights(it->second);
      m = std::move(loaded.model);
      state = std::move(*loaded.state);
    } else {
      m = std::make_unique<model::Model<float>>(t.to_model(base_));
    }
    auto tc = tcfg_;
    tc.seed = derive_seed(t.seed, 1);
    train::Trainer trainer(*m, train_, tc, std::move(state));
    while (trainer.epochs_done() < epochs) trainer.run_epoch();
    checkpoints_[t.id] = model::encode_weights(*m, &trainer.state());
    const auto ev = train::evaluate(*m, val_, tc.batch_size);
    TrialResult r;
    r.val_accuracy = ev.accuracy;
    r.val_loss = ev.loss;
    return r;
  }

  /// Checkpoint bytes of a trial, if it has been trained.
  const std::vector<std::uint8_t>* checkpoint(std::uint64_t id) const {
    const auto it = checkpoints_.find(id);
    return it == checkpoints_.end() ? nullptr : &it->second;
  }

 private:
  EncodedSet train_;
  EncodedSet val_;
  model::ScgnetConfig base_;
  train::TrainConfig tcfg_;
  std::map<std::uint64_t, std::vector<std::uint8_t>> checkpoints_;
};

}  // namespace scgnet::tune
