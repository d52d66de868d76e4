#include <algorithm>
#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "scgnet/baselines.hpp"
#include "scgnet/rng.hpp"
#include "support.hpp"

using namespace scgnet;
using namespace scgnet::baselines;

namespace {

EncodedSet from_rows(const std::vector<std::vector<float>>& rows, const std::vector<int>& y, int n_classes) {
  EncodedSet d;
  d.n_classes = n_classes;
  for (const auto& r : rows) d.x.append_row(r);
  d.y = y;
  d.synthetic.assign(y.size(), 0);
  return d;
}

double accuracy(const std::vector<int>& p, const std::vector<int>& y) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < p.size(); ++i) hit += p[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(p.size());
}

// Exhaustive scan with a full stable sort and an explicit vote table.
int knn_oracle(const EncodedSet& train, std::span<const float> q, std::size_t k) {
  std::vector<std::size_t> order(train.size());
  std::vector<double> d(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    order[i] = i;
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double diff = static_cast<double>(q[j]) - static_cast<double>(train.x.row(i)[j]);
      d[i] += diff * diff;
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return d[a] < d[b]; });
  std::map<int, int> votes;
  for (std::size_t i = 0; i < k; ++i) ++votes[train.y[order[i]]];
  int best = -1, best_votes = -1;
  for (const auto& [cls, v] : votes) {
    if (v > best_votes) {
      best = cls;
      best_votes = v;
    }
  }
  return best;
}

}  // namespace

TEST(LogRegTest, SeparableToyReachesPerfectAccuracy) {
  auto d = testsupport::blobs(50, 2, 2, 3, 0.3);
  const auto m = fit_logreg(d, {0.5, 300, 1});
  EXPECT_EQ(accuracy(logreg_predict(m, d.x), d.y), 1.0);
}

TEST(LogRegTest, ZeroEpochsGivesHalf) {
  auto d = testsupport::blobs(10, 2, 4, 3);
  const auto m = fit_logreg(d, {0.5, 0, 1});
  for (const auto& p : logreg_proba(m, d.x)) EXPECT_EQ(p[1], 0.5);
  for (const auto& w : m.w)
    for (double v : w) EXPECT_EQ(v, 0.0);
}

TEST(LogRegTest, SameSeedSameWeights) {
  auto d = testsupport::blobs(20, 3, 5, 8);
  const auto a = fit_logreg(d, {0.2, 30, 7});
  const auto b = fit_logreg(d, {0.2, 30, 7});
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.b, b.b);
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(LogRegTest, LossNonIncreasingOnConvexToy) {
  for (int c : {2, 4}) {
    auto d = testsupport::blobs(30, c, 6, 11 + c, 1.0);
    const auto m = fit_logreg(d, {0.1, 200, 0});
    ASSERT_EQ(m.loss_history.size(), 201u);
    for (std::size_t e = 1; e < m.loss_history.size(); ++e) {
      EXPECT_LE(m.loss_history[e], m.loss_history[e - 1] + 1e-6) << "epoch " << e;
    }
  }
}

TEST(LogRegTest, OneVsRestMulticlass) {
  auto d = testsupport::blobs(40, 5, 8, 21, 0.5);
  const auto m = fit_logreg(d, {0.5, 300, 0});
  EXPECT_EQ(m.outputs(), 5u);
  EXPECT_GE(accuracy(logreg_predict(m, d.x), d.y), 0.95);
  for (const auto& p : logreg_proba(m, d.x)) {
    double s = 0;
    for (double v : p) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(LogRegTest, NonFiniteLoss) {
  auto d = testsupport::blobs(5, 2, 3, 1);
  d.x.data[0] = std::numeric_limits<float>::infinity();
  try {
    fit_logreg(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonFiniteLoss);
  }
}

// ---------------------------------------------------------------------------

TEST(Knn, K1QueryOnTrainingPoint) {
  auto d = testsupport::blobs(20, 3, 4, 5);
  const auto p = knn_predict(d, d.x, 1);
  EXPECT_EQ(p, d.y);
}

TEST(Knn, KEqualsTrainSizeIsGlobalMajority) {
  auto d = from_rows({{0}, {1}, {2}, {3}, {4}}, {1, 2, 2, 1, 2}, 3);
  const auto q = testsupport::blobs(10, 1, 1, 2).x;
  for (int p : knn_predict(d, q, 5)) EXPECT_EQ(p, 2);
}

TEST(Knn, VoteTieGoesToSmallerClass) {
  auto d = from_rows({{0}, {2}}, {1, 0}, 2);
  FeatureMatrix q;
  q.append_row(std::vector<float>{1.0f});
  EXPECT_EQ(knn_predict(d, q, 2), std::vector<int>{0});
  // Equidistant neighbours with k=1: the lower training index wins.
  EXPECT_EQ(knn_predict(d, q, 1), std::vector<int>{1});
}

TEST(Knn, MatchesBruteForceOracle) {
  Rng rng(99);
  EncodedSet train;
  train.n_classes = 4;
  for (int i = 0; i < 200; ++i) {
    std::vector<float> r(3);
    for (auto& v : r) v = static_cast<float>(rng.below(5));  // many exact distance ties
    train.x.append_row(r);
    train.y.push_back(static_cast<int>(rng.below(4)));
  }
  FeatureMatrix q;
  for (int i = 0; i < 500; ++i) {
    std::vector<float> r(3);
    for (auto& v : r) v = static_cast<float>(rng.below(6)) - 0.5f * static_cast<float>(rng.below(2));
    q.append_row(r);
  }
  for (std::size_t k : {1, 2, 5, 8}) {
    const auto p = knn_predict(train, q, k);
    for (std::size_t i = 0; i < q.rows; ++i) ASSERT_EQ(p[i], knn_oracle(train, q.row(i), k)) << "k=" << k;
  }
}

TEST(Knn, Errors) {
  EncodedSet empty;
  FeatureMatrix q(1, 0);
  try {
    knn_predict(empty, q, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyTrainingSet);
  }
  auto d = testsupport::blobs(2, 2, 2, 1);
  EXPECT_THROW(knn_predict(d, d.x, 0), Error);
  EXPECT_THROW(knn_predict(d, d.x, 5), Error);
}

// ---------------------------------------------------------------------------

TEST(Mnb, SingleClassAlwaysPredicted) {
  auto d = from_rows({{1, 0, 2}, {0, 3, 1}}, {2, 2}, 3);
  FeatureMatrix q;
  q.append_row(std::vector<float>{5, 0, 0});
  q.append_row(std::vector<float>{0, 0, 0});
  EXPECT_EQ(fit_predict_mnb(d, q), (std::vector<int>{2, 2}));
}

TEST(Mnb, DisjointFeatures) {
  auto d = from_rows({{3, 1, 0, 0}, {2, 2, 0, 0}, {0, 0, 1, 4}, {0, 0, 2, 2}}, {0, 0, 1, 1}, 2);
  FeatureMatrix q;
  q.append_row(std::vector<float>{1, 0, 0, 0});
  q.append_row(std::vector<float>{0, 0, 0, 2});
  q.append_row(std::vector<float>{0, 0.5, 0, 0});
  EXPECT_EQ(fit_predict_mnb(d, q), (std::vector<int>{0, 1, 0}));
}

TEST(Mnb, ThreeClassHandPosterior) {
  auto d = from_rows({{2, 0, 0}, {1, 1, 0}, {0, 3, 0}, {0, 0, 1}, {0, 1, 1}, {1, 0, 0}}, {0, 0, 1, 2, 2, 2}, 3);
  FeatureMatrix q;
  q.append_row(std::vector<float>{1, 2, 0});
  // Bayes rule with Laplace-smoothed likelihoods:
  //   c0: (2/6)(4/7)(2/7)^2, c1: (1/6)(1/6)(4/6)^2, c2: (3/6)(2/7)(2/7)^2
  const double j0 = (2.0 / 6) * (4.0 / 7) * (2.0 / 7) * (2.0 / 7);
  const double j1 = (1.0 / 6) * (1.0 / 6) * (4.0 / 6) * (4.0 / 6);
  const double j2 = (3.0 / 6) * (2.0 / 7) * (2.0 / 7) * (2.0 / 7);
  const double z = j0 + j1 + j2;
  const auto m = fit_mnb(d);
  const auto p = mnb_proba(m, q);
  EXPECT_NEAR(p[0][0], j0 / z, 1e-12);
  EXPECT_NEAR(p[0][1], j1 / z, 1e-12);
  EXPECT_NEAR(p[0][2], j2 / z, 1e-12);
  EXPECT_EQ(mnb_predict(m, q), std::vector<int>{0});
}

TEST(Mnb, PosteriorRowsSumToOne) {
  Rng rng(4);
  EncodedSet d;
  d.n_classes = 5;
  for (int i = 0; i < 100; ++i) {
    std::vector<float> r(10);
    for (auto& v : r) v = static_cast<float>(rng.uniform());
    d.x.append_row(r);
    d.y.push_back(static_cast<int>(rng.below(5)));
  }
  for (const auto& row : mnb_proba(fit_mnb(d), d.x)) {
    double s = 0;
    for (double v : row) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Mnb, NegativeFeatureRejected) {
  auto d = from_rows({{1, -0.5f}}, {0}, 2);
  try {
    fit_mnb(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NegativeFeature);
  }
  auto ok = from_rows({{1, 0.5f}}, {0}, 2);
  FeatureMatrix q;
  q.append_row(std::vector<float>{-1, 0});
  EXPECT_THROW(fit_predict_mnb(ok, q), Error);
}
