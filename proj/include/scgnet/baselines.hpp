#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "scgnet/error.hpp"
#include "scgnet/matrix.hpp"

namespace scgnet::baselines {

// ---------------------------------------------------------------------------
// Logistic regression

struct LogRegConfig {
  double lr = 0.1;
  std::uint64_t epochs = 200;
  /// Recorded with the model; full-batch descent does not consume randomness.
  std::uint64_t seed = 0;
};

/// One weight vector per output: a single one for two classes (p = P(class
/// 1)), one per class (one-vs-rest) otherwise.
struct LogReg {
  int n_classes = 2;
  std::size_t n_features = 0;
  std::vector<std::vector<double>> w;
  std::vector<double> b;
  /// Mean cross-entropy before each epoch's update, then the final value.
  std::vector<double> loss_history;
  std::uint64_t seed = 0;

  std::size_t outputs() const { return w.size(); }
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline void check_labels(const std::vector<int>& y, int n_classes) {
  for (int v : y) {
    if (v < 0 || v >= n_classes) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(v) + " for " + std::to_string(n_classes) +
                                             " classes");
    }
  }
}

}  // namespace detail

inline double logreg_score(const LogReg& m, std::size_t out, std::span<const float> x) {
  double z = m.b[out];
  for (std::size_t j = 0; j < m.n_features; ++j) z += m.w[out][j] * x[j];
  return z;
}

/// Mean binary cross-entropy summed over the outputs.
inline double logreg_loss(const LogReg& m, const EncodedSet& d) {
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t o = 0; o < m.outputs(); ++o) {
      const double t = m.outputs() == 1 ? (d.y[i] == 1) : (d.y[i] == static_cast<int>(o));
      const double z = logreg_score(m, o, d.x.row(i));
      total += detail::softplus(z) - t * z;
    }
  }
  return total / static_cast<double>(d.size());
}

/// Full-batch gradient descent on cross-entropy from zero weights.
inline LogReg fit_logreg(const EncodedSet& d, const LogRegConfig& cfg = {}) {
  if (d.size() == 0) throw Error(Errc::EmptyTrainingSet, "logistic regression: no training rows");
  detail::check_labels(d.y, d.n_classes);
  LogReg m;
  m.n_classes = d.n_classes;
  m.n_features = d.x.cols;
  m.seed = cfg.seed;
  const std::size_t outs = d.n_classes == 2 ? 1 : static_cast<std::size_t>(d.n_classes);
  m.w.assign(outs, std::vector<double>(d.x.cols, 0.0));
  m.b.assign(outs, 0.0);
  const double inv_n = 1.0 / static_cast<double>(d.size());
  std::vector<double> gw(d.x.cols);
  for (std::uint64_t e = 0; e <= cfg.epochs; ++e) {
    const double loss = logreg_loss(m, d);
    if (!std::isfinite(loss)) {
      throw Error(Errc::NonFiniteLoss, "logistic regression: loss " + std::to_string(loss) + " at epoch " +
                                           std::to_string(e));
    }
    m.loss_history.push_back(loss);
    if (e == cfg.epochs) break;
    for (std::size_t o = 0; o < outs; ++o) {
      std::fill(gw.begin(), gw.end(), 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        const auto x = d.x.row(i);
        const double t = outs == 1 ? (d.y[i] == 1) : (d.y[i] == static_cast<int>(o));
        const double r = detail::sigmoid(logreg_score(m, o, x)) - t;
        for (std::size_t j = 0; j < d.x.cols; ++j) gw[j] += r * x[j];
        gb += r;
      }
      for (std::size_t j = 0; j < d.x.cols; ++j) m.w[o][j] -= cfg.lr * gw[j] * inv_n;
      m.b[o] -= cfg.lr * gb * inv_n;
    }
  }
  return m;
}

/// Per-row class probabilities: [1-p, p] for two classes, normalized
/// one-vs-rest sigmoids otherwise.
inline std::vector<std::vector<double>> logreg_proba(const LogReg& m, const FeatureMatrix& x) {
  if (x.cols != m.n_features) throw Error(Errc::ShapeMismatch, "logistic regression: feature width differs");
  std::vector<std::vector<double>> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (m.outputs() == 1) {
      const double p = detail::sigmoid(logreg_score(m, 0, x.row(i)));
      out[i] = {1.0 - p, p};
    } else {
      double s = 0.0;
      for (std::size_t o = 0; o < m.outputs(); ++o) {
        out[i].push_back(detail::sigmoid(logreg_score(m, o, x.row(i))));
        s += out[i].back();
      }
      for (auto& v : out[i]) v /= s;
    }
  }
  return out;
}

/// Binary: class 1 when p >= 0.5. Multiclass: highest score, lowest id on ties.
inline std::vector<int> logreg_predict(const LogReg& m, const FeatureMatrix& x) {
  std::vector<int> out;
  for (const auto& p : logreg_proba(m, x)) {
    if (p.size() == 2 && m.outputs() == 1) {
      out.push_back(p[1] >= 0.5 ? 1 : 0);
    } else {
      out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// k-nearest neighbours

/// Majority vote over the k Euclidean-nearest training rows. Equal
/// distances go to the lower training index; tied votes to the smaller
/// class id.
inline std::vector<int> knn_predict(const EncodedSet& train, const FeatureMatrix& query, std::size_t k) {
  if (train.size() == 0) throw Error(Errc::EmptyTrainingSet, "knn: no training rows");
  if (k < 1 || k > train.size()) {
    throw Error(Errc::TypeError, "knn: k=" + std::to_string(k) + " must be in [1, " + std::to_string(train.size()) +
                                     "]");
  }
  if (query.cols != train.x.cols) throw Error(Errc::ShapeMismatch, "knn: feature width differs");
  detail::check_labels(train.y, train.n_classes);
  std::vector<int> out;
  out.reserve(query.rows);
  std::vector<std::pair<double, std::size_t>> dist(train.size());
  std::vector<std::size_t> votes(static_cast<std::size_t>(train.n_classes));
  for (std::size_t q = 0; q < query.rows; ++q) {
    const auto a = query.row(q);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto b = train.x.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
        s += diff * diff;
      }
      dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(train.y[dist[i].second])];
    out.push_back(static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multinomial naive Bayes

struct MultinomialNB {
  double alpha = 1.0;
  std::vector<double> log_prior;
  /// log_likelihood[c][j] = log P(feature j | class c).
  std::vector<std::vector<double>> log_likelihood;
};

namespace detail {

inline void check_non_negative(const FeatureMatrix& x, const char* what) {
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r[j] < 0.0f) {
        throw Error(Errc::NegativeFeature, std::string(what) + " row " + std::to_string(i) + " feature " +
                                               std::to_string(j) + " = " + std::to_string(r[j]));
      }
    }
  }
}

}  // namespace detail

inline MultinomialNB fit_mnb(const EncodedSet& d, double alpha = 1.0) {
  if (d.size() == 0) throw Error(Errc::EmptyTrainingSet, "multinomial NB: no training rows");
  detail::check_labels(d.y, d.n_classes);
  detail::check_non_negative(d.x, "multinomial NB training");
  const auto n = static_cast<std::size_t>(d.n_classes);
  MultinomialNB m;
  m.alpha = alpha;
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<double>> sums(n, std::vector<double>(d.x.cols, 0.0));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto c = static_cast<std::size_t>(d.y[i]);
    ++count[c];
    const auto r = d.x.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) sums[c][j] += r[j];
  }
  for (std::size_t c = 0; c < n; ++c) {
    m.log_prior.push_back(count[c] ? std::log(static_cast<double>(count[c]) / static_cast<double>(d.size()))
                                   : -std::numeric_limits<double>::infinity());
    const double total = std::accumulate(sums[c].begin(), sums[c].end(), 0.0) + alpha * static_cast<double>(d.x.cols);
    std::vector<double> ll(d.x.cols);
    for (std::size_t j = 0; j < d.x.cols; ++j) ll[j] = std::log((sums[c][j] + alpha) / total);
    m.log_likelihood.push_back(std::move(ll));
  }
  return m;
}

/// Unnormalized log posteriors: log prior + sum_j x_j log P(j | c).
inline std::vector<std::vector<double>> mnb_log_joint(const MultinomialNB& m, const FeatureMatrix& x) {
  detail::check_non_negative(x, "multinomial NB query");
  if (!m.log_likelihood.empty() && x.cols != m.log_likelihood[0].size()) {
    throw Error(Errc::ShapeMismatch, "multinomial NB: feature width differs");
  }
  std::vector<std::vector<double>> out(x.rows, std::vector<double>(m.log_prior.size()));
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto r = x.row(i);
    for (std::size_t c = 0; c < m.log_prior.size(); ++c) {
      double s = m.log_prior[c];
      if (std::isfinite(s)) {
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * m.log_likelihood[c][j];
      }
      out[i][c] = s;
    }
  }
  return out;
}

/// Posterior probabilities (log-sum-exp normalized).
inline std::vector<std::vector<double>> mnb_proba(const MultinomialNB& m, const FeatureMatrix& x) {
  auto rows = mnb_log_joint(m, x);
  for (auto& r : rows) {
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (auto& v : r) s += (v = std::exp(v - mx));
    for (auto& v : r) v /= s;
  }
  return rows;
}

inline std::vector<int> mnb_predict(const MultinomialNB& m, const FeatureMatrix& x) {
  std::vector<int> out;
  for (const auto& r : mnb_log_joint(m, x)) {
    out.push_back(static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin()));
  }
  return out;
}

inline std::vector<int> fit_predict_mnb(const EncodedSet& train, const FeatureMatrix& query, double alpha = 1.0) {
  return mnb_predict(fit_mnb(train, alpha), query);
}

}  // namespace scgnet::baselines
