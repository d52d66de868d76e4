#pragma once

#include <algorithm>
#include <cmath>

#include "scgnet/error.hpp"
#include "scgnet/nn/tensor.hpp"

namespace scgnet::nn {

enum class LossKind { BinaryCrossEntropy, CategoricalCrossEntropy };

inline constexpr double kProbClamp = 1e-7;

template <class T>
struct LossResult {
  double value = 0.0;
  /// dLoss/dPred.
  Tensor<T> grad;
};

/// Mean cross-entropy over the batch (first axis). Probabilities are clamped
/// to [1e-7, 1 - 1e-7] before the log; the gradient is that of the clamped
/// expression, so it is zero where the clamp is active.
template <class T>
LossResult<T> loss(const Tensor<T>& pred, const Tensor<T>& target, LossKind kind) {
  if (pred.shape != target.shape || pred.shape.empty()) {
    throw Error(Errc::ShapeMismatch, "loss: prediction " + shape_str(pred.shape) + " vs target " +
                                         shape_str(target.shape));
  }
  const double batch = static_cast<double>(pred.shape[0]);
  LossResult<T> res;
  res.grad = Tensor<T>(pred.shape);
  if (batch == 0) return res;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p_raw = pred[i];
    const double p = std::clamp(p_raw, kProbClamp, 1.0 - kProbClamp);
    const bool clamped = p != p_raw;
    const double t = target[i];
    if (kind == LossKind::BinaryCrossEntropy) {
      total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
      res.grad[i] = clamped ? T(0) : static_cast<T>((p - t) / (p * (1.0 - p)) / batch);
    } else {
      total -= t * std::log(p);
      res.grad[i] = clamped ? T(0) : static_cast<T>(-t / p / batch);
    }
  }
  res.value = total / batch;
  return res;
}

/// Gradient of the mean cross-entropy with respect to the pre-activation
/// logits when the head is sigmoid+BCE or softmax+CCE: (p - t) / batch.
template <class T>
Tensor<T> logit_gradient(const Tensor<T>& prob, const Tensor<T>& target) {
  if (prob.shape != target.shape || prob.shape.empty()) {
    throw Error(Errc::ShapeMismatch, "logit_gradient: shape mismatch");
  }
  Tensor<T> g(prob.shape);
  const double batch = static_cast<double>(prob.shape[0]);
  for (std::size_t i = 0; i < prob.size(); ++i) g[i] = static_cast<T>((prob[i] - target[i]) / batch);
  return g;
}

}  // namespace scgnet::nn
