#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "scgnet/error.hpp"
#include "scgnet/matrix.hpp"
#include "scgnet/rng.hpp"

namespace scgnet::smote {

struct SmoteConfig {
  int k_neighbors = 5;
  /// Per-class target counts; classes not listed are raised to the majority count.
  std::map<int, std::size_t> target_count;
  std::uint64_t seed = 0;
};

/// Where a synthetic row came from: rows are indices into the minority set
/// passed to synthesize() (or, in balance_classes(), into the input dataset).
struct Origin {
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double lambda = 0.0;
};

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    d += t * t;
  }
  return d;
}

/// Exact k nearest neighbours of every row (self excluded), ascending by
/// Euclidean distance, ties broken by lower row index.
inline std::vector<std::vector<std::size_t>> nearest_neighbors(const FeatureMatrix& pts, std::size_t k) {
  std::vector<std::vector<std::size_t>> out(pts.rows);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < pts.rows; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < pts.rows; ++j) {
      if (j != i) dist.emplace_back(squared_distance(pts.row(i), pts.row(j)), j);
    }
    const auto kk = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    for (std::size_t m = 0; m < kk; ++m) out[i].push_back(dist[m].second);
  }
  return out;
}

/// Generates n_new points x + lambda * (nn - x). For each point the source
/// draws, in order: the base row (below(n)), the neighbour slot (below(k)),
/// then lambda (uniform() in [0, 1)).
template <class UniformSource>
FeatureMatrix synthesize(const FeatureMatrix& minority, std::size_t k, std::size_t n_new, UniformSource& rng,
                         std::vector<Origin>* origins = nullptr) {
  FeatureMatrix out(0, minority.cols);
  out.cols = minority.cols;
  if (n_new == 0) return out;
  if (minority.rows < 2 || k < 1 || k > minority.rows - 1) {
    throw Error(Errc::TooFewSamples, "minority has " + std::to_string(minority.rows) +
                                         " samples, k=" + std::to_string(k) + " needs at least k+1");
  }
  const auto knn = nearest_neighbors(minority, k);
  out.data.reserve(n_new * minority.cols);
  std::vector<float> point(minority.cols);
  for (std::size_t s = 0; s < n_new; ++s) {
    const auto base = static_cast<std::size_t>(rng.below(minority.rows));
    const auto nn = knn[base][static_cast<std::size_t>(rng.below(k))];
    const double lambda = rng.uniform();
    const auto x = minority.row(base);
    const auto y = minority.row(nn);
    for (std::size_t j = 0; j < minority.cols; ++j) {
      const double xv = x[j];
      const double yv = y[j];
      const double v = xv + lambda * (yv - xv);
      point[j] = static_cast<float>(std::clamp(v, std::min(xv, yv), std::max(xv, yv)));
    }
    out.append_row(point);
    if (origins) origins->push_back({base, nn, lambda});
  }
  return out;
}

struct BalanceResult {
  EncodedSet data;
  /// Origins of the appended synthetic rows, indices into the input set.
  std::vector<Origin> origins;
  std::vector<std::size_t> generated_per_class;
  std::vector<std::string> warnings;
};

/// Oversamples every class up to its target (the majority count by
/// default). Original rows keep their order and bits; synthetic rows are
/// appended in class order, then generation order, and flagged.
inline BalanceResult balance_classes(const EncodedSet& in, const SmoteConfig& cfg) {
  if (cfg.k_neighbors < 1) throw Error(Errc::TooFewSamples, "k_neighbors must be at least 1");
  BalanceResult res;
  res.data = in;
  if (res.data.synthetic.size() != in.size()) res.data.synthetic.assign(in.size(), 0);
  res.generated_per_class.assign(static_cast<std::size_t>(in.n_classes), 0);

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(in.n_classes));
  for (std::size_t i = 0; i < in.size(); ++i) members[static_cast<std::size_t>(in.y[i])].push_back(i);
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());

  for (int c = 0; c < in.n_classes; ++c) {
    const auto& idx = members[static_cast<std::size_t>(c)];
    const auto it = cfg.target_count.find(c);
    const std::size_t target = it != cfg.target_count.end() ? it->second : majority;
    if (target < idx.size()) {
      throw Error(Errc::TooFewSamples, "class " + std::to_string(c) + ": target " + std::to_string(target) +
                                           " is below its current count " + std::to_string(idx.size()));
    }
    const std::size_t need = target - idx.size();
    if (need == 0) continue;
    if (idx.empty()) {
      res.warnings.push_back("class " + std::to_string(c) + " has no samples; not oversampled");
      continue;
    }
    if (idx.size() < 2) {
      throw Error(Errc::TooFewSamples, "class " + std::to_string(c) + " has 1 sample; SMOTE needs at least 2");
    }
    std::size_t k = static_cast<std::size_t>(cfg.k_neighbors);
    if (k > idx.size() - 1) {
      res.warnings.push_back("class " + std::to_string(c) + ": k clamped from " + std::to_string(k) + " to " +
                             std::to_string(idx.size() - 1));
      k = idx.size() - 1;
    }
    const EncodedSet minority = in.subset(idx);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
    std::vector<Origin> local;
    const auto synth = synthesize(minority.x, k, need, rng, &local);
    for (std::size_t s = 0; s < synth.rows; ++s) {
      res.data.x.append_row(synth.row(s));
      res.data.y.push_back(c);
      res.data.synthetic.push_back(1);
      res.origins.push_back({idx[local[s].base], idx[local[s].neighbor], local[s].lambda});
    }
    res.generated_per_class[static_cast<std::size_t>(c)] = need;
  }
  return res;
}

}  // namespace scgnet::smote
