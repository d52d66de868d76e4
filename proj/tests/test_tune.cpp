#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "scgnet/tune.hpp"
#include "support.hpp"

using namespace scgnet;
using namespace scgnet::tune;

namespace {

// Scores are a fixed function of (trial id, epochs): accuracy grows with
// epochs toward a per-trial ceiling. Records every call.
struct FakeEvaluator {
  std::map<std::uint64_t, double> ceiling;
  std::set<std::uint64_t> failing;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> calls;
  std::uint64_t salt = 0;

  TrialResult run(const TrialConfig& t, std::uint64_t epochs) {
    calls.emplace_back(t.id, epochs);
    if (failing.count(t.id)) throw Error(Errc::NonFiniteLoss, "planted failure");
    double c;
    if (auto it = ceiling.find(t.id); it != ceiling.end()) {
      c = it->second;
    } else {
      Rng r(derive_seed(salt, t.id));
      c = 0.5 + 0.4 * r.uniform();
    }
    TrialResult res;
    res.val_accuracy = c * (1.0 - 1.0 / (1.0 + static_cast<double>(epochs)));
    res.val_loss = 1.0 - res.val_accuracy;
    return res;
  }
};

std::vector<TrialConfig> configs(std::size_t n) {
  std::vector<TrialConfig> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].id = i;
  return out;
}

SearchSpace small_space() {
  SearchSpace s;
  s.kernels = {2, 3};
  s.kernel_size = {2, 3};
  s.dropout = {0.2};
  s.conv_blocks = {1};
  s.gru_units = {2, 3};
  s.gru_blocks = {1};
  return s;
}

std::vector<std::pair<std::size_t, double>> nr(const std::vector<Bracket>& bs) {
  std::vector<std::pair<std::size_t, double>> out;
  for (const auto& b : bs) out.emplace_back(b.n, b.r);
  return out;
}

}  // namespace

TEST(Space, TableValuesAndCardinality) {
  const SearchSpace s;
  EXPECT_EQ(s.kernels, (std::vector<std::size_t>{32, 64, 128}));
  EXPECT_EQ(s.kernel_size, (std::vector<std::size_t>{2, 5, 7}));
  EXPECT_EQ(s.dropout, (std::vector<double>{0.2, 0.4, 0.5}));
  EXPECT_EQ(s.conv_blocks, (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_EQ(s.gru_units, (std::vector<std::size_t>{100, 200, 300}));
  EXPECT_EQ(s.gru_blocks, (std::vector<std::size_t>{1, 2, 3, 4}));
  EXPECT_EQ(s.activation.size(), 3u);
  EXPECT_EQ(s.cardinality(), 3888u);
}

TEST(Sample, Reproducible) {
  Rng a(5), b(5);
  for (int i = 0; i < 50; ++i) {
    const auto x = sample(SearchSpace{}, a, 122), y = sample(SearchSpace{}, b, 122);
    EXPECT_TRUE(x.same_point(y));
  }
}

TEST(Sample, SingleValueSpace) {
  SearchSpace s;
  s.kernels = {64};
  s.kernel_size = {5};
  s.dropout = {0.4};
  s.conv_blocks = {3};
  s.gru_units = {200};
  s.gru_blocks = {2};
  s.activation = {nn::ActivationKind::Elu};
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto t = sample(s, rng, 122);
    EXPECT_EQ(t.kernels, 64u);
    EXPECT_EQ(t.kernel_size, 5u);
    EXPECT_EQ(t.dropout, 0.4);
    EXPECT_EQ(t.conv_blocks, 3u);
    EXPECT_EQ(t.gru_units, 200u);
    EXPECT_EQ(t.gru_blocks, 2u);
    EXPECT_EQ(t.activation, nn::ActivationKind::Elu);
  }
}

TEST(Sample, FrequenciesWithinThreeSigmaOfUniform) {
  const SearchSpace s;
  Rng rng(31337);
  const int n = 10000;
  std::map<std::string, std::map<std::string, int>> counts;
  for (int i = 0; i < n; ++i) {
    const auto t = sample(s, rng, 122);
    ++counts["kernels"][std::to_string(t.kernels)];
    ++counts["kernel_size"][std::to_string(t.kernel_size)];
    ++counts["dropout"][std::to_string(t.dropout)];
    ++counts["conv_blocks"][std::to_string(t.conv_blocks)];
    ++counts["gru_units"][std::to_string(t.gru_units)];
    ++counts["gru_blocks"][std::to_string(t.gru_blocks)];
    ++counts["activation"][nn::activation_name(t.activation)];
  }
  const std::map<std::string, std::size_t> sizes{{"kernels", 3},     {"kernel_size", 3}, {"dropout", 3},
                                                 {"conv_blocks", 4}, {"gru_units", 3},   {"gru_blocks", 4},
                                                 {"activation", 3}};
  for (const auto& [axis, k] : sizes) {
    ASSERT_EQ(counts[axis].size(), k) << axis;
    const double p = 1.0 / static_cast<double>(k);
    const double sigma = std::sqrt(n * p * (1 - p));
    for (const auto& [value, c] : counts[axis]) {
      EXPECT_LE(std::abs(c - n * p), 3 * sigma) << axis << "=" << value;
    }
  }
}

TEST(Sample, ResamplesUnderflowAndExhausts) {
  SearchSpace s;
  s.kernel_size = {2, 7};
  s.conv_blocks = {1, 4};
  Rng rng(3);
  for (int i = 0; i < 200; ++i) EXPECT_TRUE(fits(sample(s, rng, 30), 30));
  s.kernel_size = {7};
  s.conv_blocks = {4};
  try {
    sample(s, rng, 30);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ExhaustedRetries);
  }
}

TEST(Sample, ConvChainForDefaultShape) {
  EXPECT_EQ(conv_chain(122, 2, 2), (std::vector<std::size_t>{122, 121, 60, 59, 29}));
  EXPECT_THROW(conv_chain(8, 4, 2), Error);
}

// ---------------------------------------------------------------------------

TEST(Schedule, R81Eta3HandExpanded) {
  // n = ceil(5 * 3^s / (s + 1)), r = 81 / 3^s for s = 4..0.
  const auto b = hyperband_schedule(81, 3);
  ASSERT_EQ(b.size(), 5u);
  EXPECT_EQ(nr(b), (std::vector<std::pair<std::size_t, double>>{{81, 1}, {34, 3}, {15, 9}, {8, 27}, {5, 81}}));
  EXPECT_EQ(b.front().s, 4u);
  EXPECT_EQ(b.back().s, 0u);
}

TEST(Schedule, R27Eta3HandExpanded) {
  EXPECT_EQ(nr(hyperband_schedule(27, 3)),
            (std::vector<std::pair<std::size_t, double>>{{27, 1}, {12, 3}, {6, 9}, {4, 27}}));
}

TEST(Schedule, NonPowerResource) {
  // s_max = floor(log_2 10) = 3; n = ceil(4 * 2^s / (s + 1)).
  EXPECT_EQ(nr(hyperband_schedule(10, 2)),
            (std::vector<std::pair<std::size_t, double>>{{8, 1.25}, {6, 2.5}, {4, 5}, {4, 10}}));
}

TEST(Schedule, DegenerateR1) {
  EXPECT_EQ(nr(hyperband_schedule(1, 3)), (std::vector<std::pair<std::size_t, double>>{{1, 1}}));
}

TEST(Schedule, PureAndValidated) {
  EXPECT_EQ(nr(hyperband_schedule(81, 3)), nr(hyperband_schedule(81, 3)));
  EXPECT_THROW(hyperband_schedule(0, 3), Error);
  EXPECT_THROW(hyperband_schedule(81, 1), Error);
  EXPECT_EQ(s_max_of(80, 3), 3u);
  EXPECT_EQ(s_max_of(81, 3), 4u);
}

// ---------------------------------------------------------------------------

TEST(Halving, NineConfigsEta3) {
  FakeEvaluator ev;
  const auto h = successive_halving(configs(9), 1.0, 3, ev);
  ASSERT_EQ(h.survivors.size(), 3u);
  EXPECT_EQ(h.survivors[0].size(), 9u);
  EXPECT_EQ(h.survivors[1].size(), 3u);
  EXPECT_EQ(h.survivors[2].size(), 1u);
  for (std::size_t i = 1; i < h.survivors.size(); ++i) {
    const std::set<std::uint64_t> prev(h.survivors[i - 1].begin(), h.survivors[i - 1].end());
    for (auto id : h.survivors[i]) EXPECT_TRUE(prev.count(id));
  }
  // Round epochs 1, 3, 9; resumed training costs only the increments.
  EXPECT_EQ(h.epochs_consumed, 9u * 1 + 3u * 2 + 1u * 6);
}

TEST(Halving, SingleConfigReturnsAfterR0) {
  FakeEvaluator ev;
  const auto h = successive_halving(configs(1), 5.0, 3, ev);
  ASSERT_EQ(ev.calls.size(), 1u);
  EXPECT_EQ(ev.calls[0].second, 5u);
  EXPECT_EQ(h.best().trial.id, 0u);
}

TEST(Halving, PlantedDominantConfigSurvives) {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    const std::uint64_t eta = 2 + rng.below(3);
    FakeEvaluator ev;
    ev.salt = rng.next();
    const std::uint64_t planted = rng.below(n);
    ev.ceiling[planted] = 0.95;
    const auto h = successive_halving(configs(n), 1.0, eta, ev);
    ASSERT_EQ(h.best().trial.id, planted);
    for (const auto& round : h.survivors) {
      ASSERT_NE(std::find(round.begin(), round.end(), planted), round.end());
    }
  }
}

TEST(Halving, TieBreakByLossThenId) {
  struct TieEval {
    TrialResult run(const TrialConfig& t, std::uint64_t) {
      TrialResult r;
      r.val_accuracy = 0.5;
      r.val_loss = t.id == 4 ? 0.1 : 0.3;
      return r;
    }
  } ev;
  const auto h = successive_halving(configs(6), 1.0, 3, ev);
  EXPECT_EQ(h.survivors[1], (std::vector<std::uint64_t>{4, 0}));
  EXPECT_EQ(h.best().trial.id, 4u);
}

TEST(Halving, FailedTrialsAreEliminated) {
  FakeEvaluator ev;
  ev.failing = {0, 1, 2, 3};
  const auto h = successive_halving(configs(9), 1.0, 3, ev);
  for (auto id : h.survivors[1]) EXPECT_GE(id, 4u);
  EXPECT_TRUE(h.best().result.ok);
}

// ---------------------------------------------------------------------------

TEST(Hyperband, BudgetsAndLogDeterminism) {
  FakeEvaluator ev1, ev2;
  std::vector<std::string> lines1, lines2;
  const auto a = hyperband(SearchSpace{}, 81, 3, ev1, 7, 122, [&](const LogEntry& e) { lines1.push_back(e.to_json().dump()); });
  const auto b = hyperband(SearchSpace{}, 81, 3, ev2, 7, 122, [&](const LogEntry& e) { lines2.push_back(e.to_json().dump()); });
  EXPECT_EQ(lines1, lines2);
  EXPECT_EQ(a.best.trial.id, b.best.trial.id);
  ASSERT_EQ(a.brackets.size(), 5u);
  std::set<std::uint64_t> ids;
  for (const auto& br : a.brackets) {
    EXPECT_EQ(br.budget, 5u * 81u);
    EXPECT_LE(br.halving.epochs_consumed, br.budget) << "bracket s=" << br.bracket.s;
    EXPECT_EQ(br.halving.survivors.front().size(), br.bracket.n);
    EXPECT_LE(br.halving.survivors.size(), br.bracket.s + 1);
    for (auto id : br.halving.survivors.front()) EXPECT_TRUE(ids.insert(id).second);
  }
  EXPECT_EQ(ids.size(), 81u + 34 + 15 + 8 + 5);
  // The largest bracket ends with one survivor trained for R epochs.
  EXPECT_EQ(a.brackets[0].halving.survivors.back().size(), 1u);
  EXPECT_EQ(a.brackets[0].halving.final_round.front().result.epochs, 81u);
  EXPECT_EQ(a.log.size(), lines1.size());
}

TEST(Hyperband, R1SingleTrial) {
  FakeEvaluator ev;
  const auto r = hyperband(SearchSpace{}, 1, 3, ev, 2, 122);
  ASSERT_EQ(r.brackets.size(), 1u);
  EXPECT_EQ(ev.calls.size(), 1u);
  EXPECT_EQ(ev.calls[0].second, 1u);
}

TEST(Hyperband, AllFailed) {
  struct Boom {
    TrialResult run(const TrialConfig&, std::uint64_t) { throw Error(Errc::NonFiniteLoss, "x"); }
  } ev;
  try {
    hyperband(SearchSpace{}, 9, 3, ev, 2, 122);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllTrialsFailed);
  }
}

TEST(RandomSearch, SingleTrialIsBest) {
  FakeEvaluator ev;
  const auto r = random_search(SearchSpace{}, 1, 4, ev, 3, 122);
  ASSERT_EQ(r.ranked.size(), 1u);
  EXPECT_EQ(r.best().trial.id, 0u);
}

TEST(RandomSearch, DeterministicRankingAndFailuresRecorded) {
  FakeEvaluator a, b;
  a.failing = b.failing = {2};
  const auto x = random_search(SearchSpace{}, 8, 4, a, 3, 122);
  const auto y = random_search(SearchSpace{}, 8, 4, b, 3, 122);
  ASSERT_EQ(x.ranked.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(x.ranked[i].trial.id, y.ranked[i].trial.id);
    EXPECT_TRUE(x.ranked[i].trial.same_point(y.ranked[i].trial));
  }
  EXPECT_EQ(x.failures, 1u);
  EXPECT_EQ(x.ranked.back().trial.id, 2u);
  EXPECT_FALSE(x.ranked.back().result.ok);
  EXPECT_THROW(random_search(SearchSpace{}, 0, 4, a, 3, 122), Error);
}

// ---------------------------------------------------------------------------

namespace {

TrainingEvaluator tiny_evaluator(std::uint64_t seed) {
  const auto data = testsupport::blobs(15, 2, 12, seed);
  const auto h = train::stratified_holdout(data.y, 0.2, seed);
  train::TrainConfig tc;
  tc.batch_size = 8;
  tc.seed = seed;
  return TrainingEvaluator(data.subset(h.train), data.subset(h.val), testsupport::tiny_config(true), tc);
}

}  // namespace

TEST(Evaluator, ResumedTrainingIsBitExact) {
  TrialConfig t;
  t.id = 3;
  t.seed = 44;
  t.kernels = 3;
  t.kernel_size = 2;
  t.gru_units = 3;
  auto segmented = tiny_evaluator(1);
  const auto r1 = segmented.run(t, 1);
  const auto r3 = segmented.run(t, 3);
  const auto r9 = segmented.run(t, 9);
  auto single = tiny_evaluator(1);
  const auto s9 = single.run(t, 9);
  EXPECT_EQ(*segmented.checkpoint(3), *single.checkpoint(3));
  EXPECT_EQ(r9.val_accuracy, s9.val_accuracy);
  EXPECT_EQ(r9.val_loss, s9.val_loss);
  (void)r1;
  (void)r3;
}

TEST(Evaluator, HalvingWithCheckpointsMatchesSingleShot) {
  auto ev = tiny_evaluator(2);
  auto cs = configs(3);
  for (auto& c : cs) {
    c.kernels = 2 + c.id;
    c.gru_units = 2;
    c.seed = 100 + c.id;
  }
  const auto h = successive_halving(cs, 1.0, 3, ev);
  ASSERT_EQ(h.survivors.size(), 2u);
  const auto winner = h.best().trial;
  auto fresh = tiny_evaluator(2);
  const auto once = fresh.run(winner, 3);
  EXPECT_EQ(*ev.checkpoint(winner.id), *fresh.checkpoint(winner.id));
  EXPECT_EQ(h.best().result.val_loss, once.val_loss);
}

TEST(Evaluator, TinyHyperbandEndToEnd) {
  auto ev = tiny_evaluator(3);
  const auto r = hyperband(small_space(), 3, 3, ev, 9, 12);
  EXPECT_TRUE(r.best.result.ok);
  EXPECT_GE(r.best.result.val_accuracy, 0.0);
  EXPECT_EQ(r.brackets.size(), 2u);
}
