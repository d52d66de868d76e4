#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "scgnet/error.hpp"
#include "scgnet/nn/layers.hpp"
#include "scgnet/rng.hpp"

namespace scgnet::nn {

/// One tensor to perturb: its values and the analytic gradient to compare.
template <class T>
struct GradTarget {
  std::string name;
  std::vector<T>* values;
  std::vector<double> analytic;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;

  bool passed(double tol) const { return max_rel_error < tol; }

  void merge(const GradCheckResult& o) {
    if (o.checked > 0 && (checked == 0 || o.max_rel_error > max_rel_error)) {
      max_rel_error = o.max_rel_error;
      worst_tensor = o.worst_tensor;
      worst_index = o.worst_index;
      worst_analytic = o.worst_analytic;
      worst_numeric = o.worst_numeric;
    }
    checked += o.checked;
  }
};

/// |a - n| / max(|a|, |n|, 1e-8)
inline double relative_error(double a, double n) {
  return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-8});
}

template <class T>
std::vector<double> widen(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

/// Central differences (f(x+eps) - f(x-eps)) / 2eps for every element of
/// every target, compared against the recorded analytic gradients.
/// `objective` must be a pure function of the target values.
template <class T>
GradCheckResult compare_gradients(const std::function<double()>& objective, std::vector<GradTarget<T>>& targets,
                                  double eps) {
  const double f0 = objective();
  if (objective() != f0) throw Error(Errc::NonDeterministicLayer, "two identical forward passes differ");
  GradCheckResult res;
  for (auto& t : targets) {
    auto& v = *t.values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T orig = v[i];
      v[i] = static_cast<T>(orig + eps);
      const double fp = objective();
      v[i] = static_cast<T>(orig - eps);
      const double fm = objective();
      v[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = relative_error(t.analytic[i], numeric);
      ++res.checked;
      if (res.checked == 1 || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_tensor = t.name;
        res.worst_index = i;
        res.worst_analytic = t.analytic[i];
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

/// Copies every parameter and buffer of `from` into the structurally
/// identical `to` (same layer type and sizes, possibly another scalar type).
template <class A, class B>
void copy_state(Layer<A>& from, Layer<B>& to) {
  auto pa = from.params();
  auto pb = to.params();
  auto ba = from.buffers();
  auto bb = to.buffers();
  if (pa.size() != pb.size() || ba.size() != bb.size()) {
    throw Error(Errc::ShapeMismatch, "copy_state: layers differ in structure");
  }
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value.shape != pb[i]->value.shape) throw Error(Errc::ShapeMismatch, "copy_state: parameter shape");
    std::copy(pa[i]->value.values.begin(), pa[i]->value.values.end(), pb[i]->value.values.begin());
  }
  for (std::size_t i = 0; i < ba.size(); ++i) {
    std::copy(ba[i].tensor->values.begin(), ba[i].tensor->values.end(), bb[i].tensor->values.begin());
  }
}

inline Tensor<double> objective_weights(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> w(shape);
  for (auto& v : w.values) v = rng.uniform(-1.0, 1.0);
  return w;
}

/// Gradient check of `layer` on `input`. The scalar objective is sum(w * y)
/// with fixed random weights w drawn from `seed`. Analytic gradients come
/// from layer.backward() at the layer's own precision; the numerical
/// derivative is taken on `twin`, a layer of the same structure whose state
/// is copied from `layer` and which may run at a wider precision so that
/// rounding in the forward pass does not swamp the finite difference.
template <class T, class U>
GradCheckResult grad_check(Layer<T>& layer, Layer<U>& twin, const Tensor<T>& input, double eps, std::uint64_t seed,
                           Mode mode = Mode::Train) {
  const auto w = objective_weights(layer.output_shape(input.shape), seed);

  Tensor<T> wt(w.shape);
  std::copy(w.values.begin(), w.values.end(), wt.values.begin());
  layer.zero_grad();
  layer.forward(input, mode);
  const auto dx = layer.backward(wt);

  copy_state(layer, twin);
  Tensor<U> x(input.shape);
  std::copy(input.values.begin(), input.values.end(), x.values.begin());
  auto objective = [&]() {
    const auto y = twin.forward(x, mode);
    double f = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) f += static_cast<double>(y[i]) * w[i];
    return f;
  };

  std::vector<GradTarget<U>> targets;
  targets.push_back({"input", &x.values, widen(dx.values)});
  auto lp = layer.params();
  auto tp = twin.params();
  for (std::size_t i = 0; i < lp.size(); ++i) {
    targets.push_back({lp[i]->name, &tp[i]->value.values, widen(lp[i]->grad.values)});
  }
  return compare_gradients<U>(objective, targets, eps);
}

/// Same-precision check: the layer is its own twin.
template <class T>
GradCheckResult grad_check(Layer<T>& layer, const Tensor<T>& input, double eps, std::uint64_t seed,
                           Mode mode = Mode::Train) {
  return grad_check(layer, layer, input, eps, seed, mode);
}

}  // namespace scgnet::nn
