#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "scgnet/error.hpp"
#include "scgnet/nn/layers.hpp"

namespace scgnet::optim {

/// lr0 * decay^epoch
inline double lr_at(double lr0, double decay_rate, std::uint64_t epoch) {
  return lr0 * std::pow(decay_rate, static_cast<double>(epoch));
}

template <class T>
struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  std::uint64_t t = 0;
  std::vector<nn::Tensor<T>> m;
  std::vector<nn::Tensor<T>> v;

  bool operator==(const AdamState&) const = default;
};

/// Zeroed moments shaped like `params`.
template <class T>
AdamState<T> make_adam_state(const std::vector<nn::Param<T>*>& params) {
  AdamState<T> s;
  for (const auto* p : params) {
    s.m.emplace_back(p->value.shape);
    s.v.emplace_back(p->value.shape);
  }
  return s;
}

/// One bias-corrected Adam update of every parameter from its gradient.
template <class T>
void adam_step(const std::vector<nn::Param<T>*>& params, AdamState<T>& s, double lr) {
  using A = AdamState<T>;
  if (s.m.empty() && s.t == 0) s = make_adam_state(params);
  if (s.m.size() != params.size() || s.v.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "adam state holds " + std::to_string(s.m.size()) + " tensors for " +
                                         std::to_string(params.size()) + " parameters");
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(A::kBeta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(A::kBeta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = s.m[i];
    auto& v = s.v[i];
    if (m.shape != p.value.shape || v.shape != p.value.shape || p.grad.shape != p.value.shape) {
      throw Error(Errc::ShapeMismatch, "adam: shape of " + p.name + " " + nn::shape_str(p.value.shape));
    }
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      const double mj = A::kBeta1 * m[j] + (1.0 - A::kBeta1) * g;
      const double vj = A::kBeta2 * v[j] + (1.0 - A::kBeta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / c1;
      const double vhat = vj / c2;
      p.value[j] = static_cast<T>(p.value[j] - lr * mhat / (std::sqrt(vhat) + A::kEps));
    }
  }
}

}  // namespace scgnet::optim
