#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "scgnet/smote.hpp"
#include "support.hpp"

using namespace scgnet;
using namespace scgnet::smote;

namespace {

FeatureMatrix points(const std::vector<std::vector<float>>& rows) {
  FeatureMatrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

FeatureMatrix random_points(std::size_t n, std::size_t d, Rng& rng) {
  FeatureMatrix m(n, d);
  for (auto& v : m.data) v = static_cast<float>(rng.normal() * 3.0);
  return m;
}

// Replays fixed draws: every below() returns 0 unless queued, uniform() returns lambda.
struct ScriptedSource {
  double lambda = 0.5;
  std::vector<std::uint64_t> picks;
  std::size_t next = 0;
  std::uint64_t below(std::uint64_t n) {
    const auto v = next < picks.size() ? picks[next++] : 0;
    return v % n;
  }
  double uniform() { return lambda; }
};

// Residual of p from segment [a, b], measured directly.
double segment_residual(std::span<const float> p, std::span<const float> a, std::span<const float> b) {
  double ab2 = 0.0, t = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    ab2 += (double(b[j]) - a[j]) * (double(b[j]) - a[j]);
    t += (double(p[j]) - a[j]) * (double(b[j]) - a[j]);
  }
  t = ab2 > 0 ? std::clamp(t / ab2, 0.0, 1.0) : 0.0;
  double r = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double q = a[j] + t * (double(b[j]) - a[j]);
    r += (p[j] - q) * (p[j] - q);
  }
  return std::sqrt(r);
}

EncodedSet labelled(const FeatureMatrix& x, const std::vector<int>& y, int n_classes) {
  EncodedSet s;
  s.x = x;
  s.y = y;
  s.n_classes = n_classes;
  return s;
}

}  // namespace

TEST(Neighbors, ExcludeSelfAndBreakTiesByIndex) {
  const auto m = points({{0}, {1}, {-1}, {3}});
  const auto nn = nearest_neighbors(m, 2);
  EXPECT_EQ(nn[0], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(nn[1], (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(nn[3], (std::vector<std::size_t>{1, 0}));
}

TEST(Neighbors, MatchBruteForce) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_points(5 + rng.below(60), 1 + rng.below(6), rng);
    const std::size_t k = 1 + rng.below(4);
    const auto nn = nearest_neighbors(m, k);
    for (std::size_t i = 0; i < m.rows; ++i) {
      std::vector<std::pair<double, std::size_t>> d;
      for (std::size_t j = 0; j < m.rows; ++j) {
        if (j != i) d.push_back({squared_distance(m.row(i), m.row(j)), j});
      }
      std::sort(d.begin(), d.end());
      for (std::size_t r = 0; r < k; ++r) ASSERT_EQ(nn[i][r], d[r].second);
    }
  }
}

TEST(Synthesize, IdenticalPointsReproduceThePoint) {
  const auto m = points({{1.5f, -2.0f}, {1.5f, -2.0f}, {1.5f, -2.0f}});
  Rng rng(3);
  const auto s = synthesize(m, 2, 25, rng);
  ASSERT_EQ(s.rows, 25u);
  for (std::size_t i = 0; i < s.rows; ++i) {
    EXPECT_EQ(s.row(i)[0], 1.5f);
    EXPECT_EQ(s.row(i)[1], -2.0f);
  }
}

TEST(Synthesize, MidpointWithFixedLambda) {
  const auto m = points({{0.0f}, {1.0f}});
  ScriptedSource src;
  src.picks = {0, 0, 1, 0};
  std::vector<Origin> origins;
  const auto s = synthesize(m, 1, 2, src, &origins);
  ASSERT_EQ(s.rows, 2u);
  EXPECT_EQ(s.row(0)[0], 0.5f);
  EXPECT_EQ(s.row(1)[0], 0.5f);
  EXPECT_EQ(origins[0].base, 0u);
  EXPECT_EQ(origins[0].neighbor, 1u);
  EXPECT_EQ(origins[1].base, 1u);
  EXPECT_EQ(origins[1].neighbor, 0u);
  src = {};
  src.lambda = 0.25;
  EXPECT_EQ(synthesize(m, 1, 1, src).row(0)[0], 0.25f);
}

TEST(Synthesize, ZeroRequestedIsEmpty) {
  const auto m = points({{0.0f, 1.0f}});  // too few for any k, but nothing is asked
  Rng rng(1);
  const auto s = synthesize(m, 5, 0, rng);
  EXPECT_EQ(s.rows, 0u);
  EXPECT_EQ(s.cols, 2u);
}

TEST(Synthesize, TooFewSamples) {
  Rng rng(1);
  try {
    synthesize(points({{0.0f}, {1.0f}, {2.0f}}), 3, 1, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewSamples);
  }
  EXPECT_THROW(synthesize(points({{0.0f}}), 1, 1, rng), Error);
}

TEST(Synthesize, EveryPointLiesOnItsSegment) {
  Rng gen(99);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 6 + gen.below(195);
    const auto m = random_points(n, 1 + gen.below(12), gen);
    const std::size_t k = 1 + gen.below(5);
    Rng rng(gen.next());
    std::vector<Origin> origins;
    const auto s = synthesize(m, k, 50, rng, &origins);
    const auto nn = nearest_neighbors(m, k);
    for (std::size_t i = 0; i < s.rows; ++i) {
      const auto& o = origins[i];
      ASSERT_NE(std::find(nn[o.base].begin(), nn[o.base].end(), o.neighbor), nn[o.base].end());
      ASSERT_GE(o.lambda, 0.0);
      ASSERT_LT(o.lambda, 1.0);
      ASSERT_LT(segment_residual(s.row(i), m.row(o.base), m.row(o.neighbor)), 1e-5);
    }
  }
}

TEST(Balance, TwoClassCounts) {
  Rng rng(4);
  const auto x = random_points(14, 3, rng);
  std::vector<int> y(14, 0);
  for (std::size_t i = 10; i < 14; ++i) y[i] = 1;
  const auto in = labelled(x, y, 2);
  SmoteConfig cfg;
  cfg.seed = 8;
  const auto res = balance_classes(in, cfg);
  EXPECT_EQ(res.data.size(), 20u);
  EXPECT_EQ(std::count(res.data.y.begin(), res.data.y.end(), 0), 10);
  EXPECT_EQ(std::count(res.data.y.begin(), res.data.y.end(), 1), 10);
  EXPECT_EQ(res.generated_per_class, (std::vector<std::size_t>{0, 6}));
  ASSERT_EQ(res.warnings.size(), 1u);  // k=5 clamped to 3
  for (std::size_t i = 0; i < 14; ++i) {
    ASSERT_EQ(res.data.synthetic[i], 0);
    for (std::size_t j = 0; j < 3; ++j) {
      ASSERT_EQ(std::bit_cast<std::uint32_t>(res.data.x.row(i)[j]), std::bit_cast<std::uint32_t>(x.row(i)[j]));
    }
  }
  for (std::size_t i = 14; i < 20; ++i) EXPECT_EQ(res.data.synthetic[i], 1);
  for (const auto& o : res.origins) {
    EXPECT_GE(o.base, 10u);
    EXPECT_GE(o.neighbor, 10u);
  }
}

TEST(Balance, DeterministicPerSeed) {
  Rng rng(5);
  const auto x = random_points(40, 4, rng);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = i < 25 ? 0 : i < 33 ? 1 : 2;
  const auto in = labelled(x, y, 3);
  SmoteConfig cfg;
  cfg.seed = 21;
  const auto a = balance_classes(in, cfg);
  const auto b = balance_classes(in, cfg);
  EXPECT_EQ(a.data.x, b.data.x);
  EXPECT_EQ(a.data.y, b.data.y);
  cfg.seed = 22;
  EXPECT_NE(balance_classes(in, cfg).data.x, a.data.x);
}

TEST(Balance, StaysInsideMinorityBoundingBox) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng.below(80);
    const auto x = random_points(n, 5, rng);
    std::vector<int> y(n);
    for (auto& v : y) v = rng.uniform() < 0.8 ? 0 : 1;
    y[0] = 1;
    y[1] = 1;
    y[2] = 0;
    const auto in = labelled(x, y, 2);
    SmoteConfig cfg;
    cfg.seed = rng.next();
    const auto res = balance_classes(in, cfg);
    for (int c = 0; c < 2; ++c) {
      std::vector<float> lo(5, INFINITY), hi(5, -INFINITY);
      for (std::size_t i = 0; i < n; ++i) {
        if (y[i] != c) continue;
        for (std::size_t j = 0; j < 5; ++j) {
          lo[j] = std::min(lo[j], x.row(i)[j]);
          hi[j] = std::max(hi[j], x.row(i)[j]);
        }
      }
      for (std::size_t i = n; i < res.data.size(); ++i) {
        if (res.data.y[i] != c) continue;
        for (std::size_t j = 0; j < 5; ++j) {
          ASSERT_GE(res.data.x.row(i)[j], lo[j]);
          ASSERT_LE(res.data.x.row(i)[j], hi[j]);
        }
      }
    }
  }
}

TEST(Balance, ExplicitTargetsAndErrors) {
  Rng rng(2);
  const auto x = random_points(12, 2, rng);
  std::vector<int> y{0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 0};
  const auto in = labelled(x, y, 3);
  SmoteConfig cfg;
  cfg.target_count = {{1, 5}};
  const auto res = balance_classes(in, cfg);
  EXPECT_EQ(res.generated_per_class, (std::vector<std::size_t>{0, 2, 0}));
  EXPECT_EQ(res.warnings.size(), 2u);  // k clamp for class 1, empty class 2
  cfg.target_count = {{0, 3}};
  EXPECT_THROW(balance_classes(in, cfg), Error);
  std::vector<int> single{0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
  try {
    balance_classes(labelled(x, single, 2), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewSamples);
  }
}
