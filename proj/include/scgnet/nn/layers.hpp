#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "scgnet/error.hpp"
#include "scgnet/nn/tensor.hpp"
#include "scgnet/rng.hpp"

namespace scgnet::nn {

enum class Mode { Train, Eval };

template <class T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Param(std::string n, Shape s) : name(std::move(n)), value(s), grad(s) {}
};

/// A named non-trainable tensor (running statistics) persisted with the weights.
template <class T>
struct Buffer {
  std::string name;
  Tensor<T>* tensor;
};

/// Base class for all layers. forward() caches what backward() needs;
/// backward() takes dLoss/dOutput, accumulates parameter gradients and
/// returns dLoss/dInput.
template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Param<T>*> params() { return {}; }
  virtual std::vector<Buffer<T>> buffers() { return {}; }
  virtual void init(Rng&) {}
  /// Identifies the current optimisation step; layers with randomness key
  /// their draws on it.
  virtual void set_step(std::uint64_t) {}

  void zero_grad() {
    for (auto* p : params()) p->grad.fill(T(0));
  }
};

template <class T>
void init_uniform(Tensor<T>& t, double bound, Rng& rng) {
  for (auto& v : t.values) v = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------

/// 1-D convolution, stride 1, valid padding. x [B, C_in, L] -> [B, C_out, L-K+1].
/// Without a bias the layer holds the weight only (for a conv feeding batch
/// norm, which cancels any per-channel offset).
template <class T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(std::size_t c_in, std::size_t c_out, std::size_t k, bool use_bias = true)
      : c_in_(c_in),
        c_out_(c_out),
        k_(k),
        use_bias_(use_bias),
        weight_("weight", {c_out, c_in, k}),
        bias_("bias", {c_out}) {}

  std::string kind() const override { return "conv1d"; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "conv1d");
    if (in[1] != c_in_) throw Error(Errc::ShapeMismatch, "conv1d channel mismatch: " + shape_str(in));
    if (in[2] < k_) throw Error(Errc::ShapeUnderflow, "conv1d input length " + std::to_string(in[2]) +
                                                        " shorter than kernel " + std::to_string(k_));
    return {in[0], c_out_, in[2] - k_ + 1};
  }

  void init(Rng& rng) override {
    const double bound = std::sqrt(6.0 / static_cast<double>(c_in_ * k_ + c_out_ * k_));
    init_uniform(weight_.value, bound, rng);
    bias_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    const auto out_shape = output_shape(x.shape);
    batch_ = x.shape[0];
    len_ = x.shape[2];
    out_len_ = out_shape[2];
    const std::size_t rows = c_in_ * k_;
    cols_.assign(batch_ * rows * out_len_, T(0));
    Tensor<T> y(out_shape);
    const auto w = as_matrix(weight_.value.values, c_out_, rows);
    const auto b = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(bias_.value.data(),
                                                                          static_cast<Eigen::Index>(c_out_));
    for (std::size_t n = 0; n < batch_; ++n) {
      T* col = cols_.data() + n * rows * out_len_;
      const T* xin = x.data() + n * c_in_ * len_;
      for (std::size_t c = 0; c < c_in_; ++c) {
        for (std::size_t k = 0; k < k_; ++k) {
          T* dst = col + (c * k_ + k) * out_len_;
          const T* src = xin + c * len_ + k;
          std::copy(src, src + out_len_, dst);
        }
      }
      MatMap<T> out(y.data() + n * c_out_ * out_len_, static_cast<Eigen::Index>(c_out_),
                    static_cast<Eigen::Index>(out_len_));
      out.noalias() = w * MatMap<T>(col, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out_len_));
      out.colwise() += b;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t rows = c_in_ * k_;
    Tensor<T> dx({batch_, c_in_, len_});
    auto dw = as_matrix(weight_.grad.values, c_out_, rows);
    const auto w = as_matrix(weight_.value.values, c_out_, rows);
    RowMatrix<T> dcol(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(out_len_));
    for (std::size_t n = 0; n < batch_; ++n) {
      ConstMatMap<T> g(dy.data() + n * c_out_ * out_len_, static_cast<Eigen::Index>(c_out_),
                       static_cast<Eigen::Index>(out_len_));
      ConstMatMap<T> col(cols_.data() + n * rows * out_len_, static_cast<Eigen::Index>(rows),
                         static_cast<Eigen::Index>(out_len_));
      dw.noalias() += g * col.transpose();
      if (use_bias_) {
        for (std::size_t o = 0; o < c_out_; ++o) bias_.grad[o] += g.row(static_cast<Eigen::Index>(o)).sum();
      }
      dcol.noalias() = w.transpose() * g;
      T* dxn = dx.data() + n * c_in_ * len_;
      for (std::size_t c = 0; c < c_in_; ++c) {
        for (std::size_t k = 0; k < k_; ++k) {
          const T* src = dcol.data() + (c * k_ + k) * out_len_;
          T* dst = dxn + c * len_ + k;
          for (std::size_t t = 0; t < out_len_; ++t) dst[t] += src[t];
        }
      }
    }
    return dx;
  }

  std::vector<Param<T>*> params() override {
    if (!use_bias_) return {&weight_};
    return {&weight_, &bias_};
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  bool has_bias() const { return use_bias_; }

 private:
  std::size_t c_in_, c_out_, k_;
  bool use_bias_;
  Param<T> weight_, bias_;
  std::size_t batch_ = 0, len_ = 0, out_len_ = 0;
  std::vector<T> cols_;
};

// ---------------------------------------------------------------------------

/// Max pooling, window 2, stride 2; an odd trailing element is dropped.
/// Gradient goes to the first maximal position of each window.
template <class T>
class MaxPool1d final : public Layer<T> {
 public:
  std::string kind() const override { return "maxpool1d"; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "maxpool1d");
    if (in[2] < 2) throw Error(Errc::ShapeUnderflow, "maxpool1d needs length >= 2, got " + shape_str(in));
    return {in[0], in[1], in[2] / 2};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    const auto out_shape = output_shape(x.shape);
    in_shape_ = x.shape;
    const std::size_t rows = x.shape[0] * x.shape[1];
    const std::size_t len = x.shape[2];
    const std::size_t out_len = out_shape[2];
    Tensor<T> y(out_shape);
    argmax_.assign(rows * out_len, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t t = 0; t < out_len; ++t) {
        const std::size_t i0 = r * len + 2 * t;
        const std::size_t pick = x[i0 + 1] > x[i0] ? i0 + 1 : i0;
        y[r * out_len + t] = x[pick];
        argmax_[r * out_len + t] = pick;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(in_shape_);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
    return dx;
  }

 private:
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

// ---------------------------------------------------------------------------

enum class ChannelAxis {
  Middle,  // [B, C, L]: statistics over (B, L) per channel
  Last,    // [B, T, C] or [B, C]: statistics over every leading axis per feature
};

/// Batch normalisation with running statistics (momentum 0.9, eps 1e-5).
/// Running variance uses the unbiased batch estimate.
template <class T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kMomentum = 0.9;
  static constexpr double kEps = 1e-5;

  BatchNorm(std::size_t channels, ChannelAxis axis)
      : channels_(channels),
        axis_(axis),
        gamma_("gamma", {channels}),
        beta_("beta", {channels}),
        running_mean_({channels}, T(0)),
        running_var_({channels}, T(1)),
        populated_({1}, T(0)) {
    gamma_.value.fill(T(1));
  }

  std::string kind() const override { return "batchnorm"; }

  Shape output_shape(const Shape& in) const override {
    layout(in);
    return in;
  }

  void init(Rng&) override {
    gamma_.value.fill(T(1));
    beta_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    const auto [outer, inner] = layout(x.shape);
    outer_ = outer;
    inner_ = inner;
    mode_ = mode;
    const std::size_t n = outer * inner;
    Tensor<T> y(x.shape);
    xhat_ = Tensor<T>(x.shape);
    inv_std_.assign(channels_, T(0));
    if (mode == Mode::Train) {
      if (n < 2) throw Error(Errc::ShapeMismatch, "batchnorm needs at least 2 values per channel in training");
      for (std::size_t c = 0; c < channels_; ++c) {
        double sum = 0.0;
        for_each_index(c, [&](std::size_t i) { sum += x[i]; });
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for_each_index(c, [&](std::size_t i) {
          const double d = x[i] - mean;
          sq += d * d;
        });
        const double var = sq / static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + kEps);
        inv_std_[c] = static_cast<T>(inv);
        for_each_index(c, [&](std::size_t i) {
          xhat_[i] = static_cast<T>((x[i] - mean) * inv);
          y[i] = gamma_.value[c] * xhat_[i] + beta_.value[c];
        });
        const double unbiased = sq / static_cast<double>(n - 1);
        running_mean_[c] = static_cast<T>(kMomentum * running_mean_[c] + (1.0 - kMomentum) * mean);
        running_var_[c] = static_cast<T>(kMomentum * running_var_[c] + (1.0 - kMomentum) * unbiased);
      }
      populated_[0] = T(1);
    } else {
      if (populated_[0] == T(0)) {
        throw Error(Errc::UnpopulatedRunningStats, "batchnorm evaluated before any training step");
      }
      for (std::size_t c = 0; c < channels_; ++c) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + kEps);
        inv_std_[c] = static_cast<T>(inv);
        for_each_index(c, [&](std::size_t i) {
          xhat_[i] = static_cast<T>((x[i] - running_mean_[c]) * inv);
          y[i] = gamma_.value[c] * xhat_[i] + beta_.value[c];
        });
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(dy.shape);
    const double n = static_cast<double>(outer_ * inner_);
    for (std::size_t c = 0; c < channels_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for_each_index(c, [&](std::size_t i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xhat_[i];
      });
      gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
      beta_.grad[c] += static_cast<T>(sum_dy);
      const double g = gamma_.value[c];
      const double inv = inv_std_[c];
      if (mode_ == Mode::Train) {
        for_each_index(c, [&](std::size_t i) {
          dx[i] = static_cast<T>(g * inv / n * (n * dy[i] - sum_dy - xhat_[i] * sum_dy_xhat));
        });
      } else {
        for_each_index(c, [&](std::size_t i) { dx[i] = static_cast<T>(g * inv * dy[i]); });
      }
    }
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<Buffer<T>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}, {"populated", &populated_}};
  }

  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }
  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }

 private:
  std::pair<std::size_t, std::size_t> layout(const Shape& s) const {
    if (axis_ == ChannelAxis::Middle) {
      expect_rank(s, 3, "batchnorm(channels-middle)");
      if (s[1] != channels_) throw Error(Errc::ShapeMismatch, "batchnorm channel mismatch: " + shape_str(s));
      return {s[0], s[2]};
    }
    if (s.empty() || s.back() != channels_) {
      throw Error(Errc::ShapeMismatch, "batchnorm feature mismatch: " + shape_str(s));
    }
    return {numel(s) / channels_, 1};
  }

  template <class F>
  void for_each_index(std::size_t c, F&& f) const {
    for (std::size_t o = 0; o < outer_; ++o) {
      const std::size_t base = (o * channels_ + c) * inner_;
      for (std::size_t j = 0; j < inner_; ++j) f(base + j);
    }
  }

  std::size_t channels_;
  ChannelAxis axis_;
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_, populated_;
  std::size_t outer_ = 0, inner_ = 0;
  Mode mode_ = Mode::Train;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

// ---------------------------------------------------------------------------

enum class ActivationKind { Relu, Elu, Relu6, Sigmoid, Softmax };

inline const char* activation_name(ActivationKind k) {
  switch (k) {
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Elu: return "elu";
    case ActivationKind::Relu6: return "relu6";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Softmax: return "softmax";
  }
  return "?";
}

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// Elementwise activations; softmax normalises over the last axis.
template <class T>
Tensor<T> activate(const Tensor<T>& x, ActivationKind kind) {
  Tensor<T> y(x.shape);
  switch (kind) {
    case ActivationKind::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], T(0));
      break;
    case ActivationKind::Elu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : std::expm1(x[i]);
      break;
    case ActivationKind::Relu6:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(std::max(x[i], T(0)), T(6));
      break;
    case ActivationKind::Sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
      break;
    case ActivationKind::Softmax: {
      const std::size_t width = x.shape.empty() ? 1 : x.shape.back();
      const std::size_t rows = width == 0 ? 0 : x.size() / width;
      for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data() + r * width;
        T* out = y.data() + r * width;
        const T mx = *std::max_element(in, in + width);
        double sum = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
          out[j] = std::exp(in[j] - mx);
          sum += out[j];
        }
        for (std::size_t j = 0; j < width; ++j) out[j] = static_cast<T>(out[j] / sum);
      }
      break;
    }
  }
  return y;
}

template <class T>
class Activation final : public Layer<T> {
 public:
  explicit Activation(ActivationKind kind) : kind_(kind) {}

  std::string kind() const override { return activation_name(kind_); }
  Shape output_shape(const Shape& in) const override { return in; }
  ActivationKind activation() const { return kind_; }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    x_ = x;
    y_ = activate(x, kind_);
    return y_;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(dy.shape);
    switch (kind_) {
      case ActivationKind::Relu:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = x_[i] > T(0) ? dy[i] : T(0);
        break;
      case ActivationKind::Elu:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = x_[i] > T(0) ? dy[i] : dy[i] * (y_[i] + T(1));
        break;
      case ActivationKind::Relu6:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = (x_[i] > T(0) && x_[i] < T(6)) ? dy[i] : T(0);
        break;
      case ActivationKind::Sigmoid:
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * y_[i] * (T(1) - y_[i]);
        break;
      case ActivationKind::Softmax: {
        const std::size_t width = dy.shape.back();
        const std::size_t rows = dy.size() / width;
        for (std::size_t r = 0; r < rows; ++r) {
          const T* g = dy.data() + r * width;
          const T* p = y_.data() + r * width;
          double dot = 0.0;
          for (std::size_t j = 0; j < width; ++j) dot += static_cast<double>(g[j]) * p[j];
          for (std::size_t j = 0; j < width; ++j) dx[r * width + j] = static_cast<T>(p[j] * (g[j] - dot));
        }
        break;
      }
    }
    return dx;
  }

 private:
  ActivationKind kind_;
  Tensor<T> x_, y_;
};

// ---------------------------------------------------------------------------

/// Inverted dropout. The mask for a training forward pass is drawn from a
/// stream seeded by (layer seed, current step), so repeated passes at the
/// same step reuse the same mask.
template <class T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed) : rate_(rate), seed_(seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw Error(Errc::TypeError, "dropout rate must be in [0, 1)");
  }

  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& in) const override { return in; }
  void set_step(std::uint64_t step) override { step_ = step; }
  double rate() const { return rate_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
    active_ = mode == Mode::Train && rate_ > 0.0;
    if (!active_) return x;
    Rng rng(derive_seed(seed_, step_));
    const T scale = static_cast<T>(1.0 / (1.0 - rate_));
    mask_.assign(x.size(), T(0));
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = rng.uniform() >= rate_ ? scale : T(0);
      y[i] = x[i] * mask_[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (!active_) return dy;
    Tensor<T> dx(dy.shape);
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
    return dx;
  }

  const std::vector<T>& mask() const { return mask_; }

 private:
  double rate_;
  std::uint64_t seed_;
  std::uint64_t step_ = 0;
  bool active_ = false;
  std::vector<T> mask_;
};

// ---------------------------------------------------------------------------

/// [B, C, L] -> [B, L, C]: turns conv channels into per-step features.
template <class T>
class ChannelsToSteps final : public Layer<T> {
 public:
  std::string kind() const override { return "transpose"; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "transpose");
    return {in[0], in[2], in[1]};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    in_shape_ = x.shape;
    return swap(x, x.shape[0], x.shape[1], x.shape[2]);
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    return swap(dy, in_shape_[0], in_shape_[2], in_shape_[1]);
  }

 private:
  static Tensor<T> swap(const Tensor<T>& x, std::size_t b, std::size_t a, std::size_t c) {
    Tensor<T> y({b, c, a});
    for (std::size_t n = 0; n < b; ++n) {
      for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < c; ++j) y[(n * c + j) * a + i] = x[(n * a + i) * c + j];
      }
    }
    return y;
  }

  Shape in_shape_;
};

/// [B, ...] -> [B, prod(...)].
template <class T>
class Flatten final : public Layer<T> {
 public:
  std::string kind() const override { return "flatten"; }

  Shape output_shape(const Shape& in) const override {
    if (in.empty()) throw Error(Errc::ShapeMismatch, "flatten needs a batch axis");
    return {in[0], numel(Shape(in.begin() + 1, in.end()))};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    in_shape_ = x.shape;
    return x.reshaped(output_shape(x.shape));
  }

  Tensor<T> backward(const Tensor<T>& dy) override { return dy.reshaped(in_shape_); }

 private:
  Shape in_shape_;
};

// ---------------------------------------------------------------------------

/// Gated recurrent unit over x [B, T, D] with reset applied before the
/// candidate's recurrent product:
///   z = sig(x Wz + h Uz + bz), r = sig(x Wr + h Ur + br)
///   c = tanh(x Wc + (r * h) Uc + bc), h' = (1 - z) * h + z * c
/// Parameters are packed column-wise as [z | r | c]: W [D, 3H], U [H, 3H],
/// b [3H]. Returns the full hidden sequence [B, T, H], or the last state
/// [B, H] when return_sequences is false.
template <class T>
class Gru final : public Layer<T> {
 public:
  Gru(std::size_t d_in, std::size_t hidden, bool return_sequences = true)
      : d_(d_in),
        h_(hidden),
        seq_(return_sequences),
        w_("W", {d_in, 3 * hidden}),
        u_("U", {hidden, 3 * hidden}),
        b_("b", {3 * hidden}) {}

  std::string kind() const override { return "gru"; }
  std::size_t hidden() const { return h_; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 3, "gru");
    if (in[2] != d_) throw Error(Errc::ShapeMismatch, "gru feature mismatch: " + shape_str(in));
    if (in[1] == 0) throw Error(Errc::ShapeUnderflow, "gru needs at least one time step");
    if (seq_) return {in[0], in[1], h_};
    return {in[0], h_};
  }

  void init(Rng& rng) override {
    init_uniform(w_.value, std::sqrt(6.0 / static_cast<double>(d_ + h_)), rng);
    init_uniform(u_.value, std::sqrt(6.0 / static_cast<double>(2 * h_)), rng);
    b_.value.fill(T(0));
  }

  /// Initial hidden state [B, H] for the next forward; empty means zeros.
  void set_initial_state(Tensor<T> h0) { h0_ = std::move(h0); }
  const Tensor<T>& initial_state_grad() const { return dh0_; }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    const auto out_shape = output_shape(x.shape);
    batch_ = x.shape[0];
    steps_ = x.shape[1];
    const auto B = static_cast<Eigen::Index>(batch_);
    const auto H = static_cast<Eigen::Index>(h_);
    const auto G = 3 * H;
    x_ = x;

    gx_.assign(batch_ * steps_ * 3 * h_, T(0));
    auto gx = as_matrix(gx_, batch_ * steps_, 3 * h_);
    gx.noalias() = as_matrix(x_.values, batch_ * steps_, d_) * as_matrix(w_.value.values, d_, 3 * h_);
    gx.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.value.data(), G);

    const auto u = as_matrix(u_.value.values, h_, 3 * h_);
    const std::size_t stepsz = batch_ * h_;
    z_.assign(steps_ * stepsz, T(0));
    r_.assign(steps_ * stepsz, T(0));
    c_.assign(steps_ * stepsz, T(0));
    hs_.assign((steps_ + 1) * stepsz, T(0));
    if (!h0_.values.empty()) {
      if (h0_.size() != stepsz) throw Error(Errc::ShapeMismatch, "gru initial state must be [B, H]");
      std::copy(h0_.values.begin(), h0_.values.end(), hs_.begin());
    }

    RowMatrix<T> zr(B, 2 * H), rh(B, H), cand(B, H);
    for (std::size_t t = 0; t < steps_; ++t) {
      MatMap<T> hprev(hs_.data() + t * stepsz, B, H);
      MatMap<T> hnext(hs_.data() + (t + 1) * stepsz, B, H);
      ConstStridedMap<T> gxt(gx_.data() + t * 3 * h_, B, G, Eigen::OuterStride<>(static_cast<Eigen::Index>(steps_ * 3 * h_)));
      MatMap<T> z(z_.data() + t * stepsz, B, H), r(r_.data() + t * stepsz, B, H), c(c_.data() + t * stepsz, B, H);

      zr.noalias() = hprev * u.leftCols(2 * H);
      zr += gxt.leftCols(2 * H);
      z = zr.leftCols(H).unaryExpr([](T v) { return sigmoid(v); });
      r = zr.rightCols(H).unaryExpr([](T v) { return sigmoid(v); });
      rh = r.cwiseProduct(hprev);
      cand.noalias() = rh * u.rightCols(H);
      cand += gxt.rightCols(H);
      c = cand.array().tanh();
      hnext = hprev + z.cwiseProduct(c - hprev);
    }

    Tensor<T> y(out_shape);
    if (seq_) {
      for (std::size_t t = 0; t < steps_; ++t) {
        for (std::size_t n = 0; n < batch_; ++n) {
          const T* src = hs_.data() + (t + 1) * stepsz + n * h_;
          std::copy(src, src + h_, y.data() + (n * steps_ + t) * h_);
        }
      }
    } else {
      std::copy(hs_.begin() + static_cast<std::ptrdiff_t>(steps_ * stepsz), hs_.end(), y.values.begin());
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const auto B = static_cast<Eigen::Index>(batch_);
    const auto H = static_cast<Eigen::Index>(h_);
    const auto G = 3 * H;
    const std::size_t stepsz = batch_ * h_;
    const auto u = as_matrix(u_.value.values, h_, 3 * h_);
    auto du = as_matrix(u_.grad.values, h_, 3 * h_);

    std::vector<T> dgx(batch_ * steps_ * 3 * h_, T(0));
    RowMatrix<T> dh = RowMatrix<T>::Zero(B, H);
    RowMatrix<T> dhprev(B, H), dc(B, H), dz(B, H), dac(B, H), drh(B, H), dr(B, H), dazr(B, 2 * H), rh(B, H);

    for (std::size_t t = steps_; t-- > 0;) {
      if (seq_) {
        for (std::size_t n = 0; n < batch_; ++n) {
          const T* src = dy.data() + (n * steps_ + t) * h_;
          for (std::size_t j = 0; j < h_; ++j) dh(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) += src[j];
        }
      } else if (t + 1 == steps_) {
        dh += ConstMatMap<T>(dy.data(), B, H);
      }
      ConstMatMap<T> hprev(hs_.data() + t * stepsz, B, H);
      ConstMatMap<T> z(z_.data() + t * stepsz, B, H), r(r_.data() + t * stepsz, B, H), c(c_.data() + t * stepsz, B, H);
      StridedMap<T> dgxt(dgx.data() + t * 3 * h_, B, G, Eigen::OuterStride<>(static_cast<Eigen::Index>(steps_ * 3 * h_)));

      dc = dh.cwiseProduct(z);
      dz = dh.cwiseProduct(c - hprev);
      dhprev = dh - dh.cwiseProduct(z);

      dac = dc.array() * (T(1) - c.array().square());
      rh = r.cwiseProduct(hprev);
      du.rightCols(H).noalias() += rh.transpose() * dac;
      drh.noalias() = dac * u.rightCols(H).transpose();
      dr = drh.cwiseProduct(hprev);
      dhprev += drh.cwiseProduct(r);

      dazr.leftCols(H) = dz.array() * z.array() * (T(1) - z.array());
      dazr.rightCols(H) = dr.array() * r.array() * (T(1) - r.array());
      du.leftCols(2 * H).noalias() += hprev.transpose() * dazr;
      dhprev.noalias() += dazr * u.leftCols(2 * H).transpose();

      dgxt.leftCols(2 * H) = dazr;
      dgxt.rightCols(H) = dac;
      dh = dhprev;
    }

    const auto dgx_m = as_matrix(dgx, batch_ * steps_, 3 * h_);
    as_matrix(w_.grad.values, d_, 3 * h_).noalias() += as_matrix(x_.values, batch_ * steps_, d_).transpose() * dgx_m;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.grad.data(), G) += dgx_m.colwise().sum();
    Tensor<T> dx({batch_, steps_, d_});
    as_matrix(dx.values, batch_ * steps_, d_).noalias() = dgx_m * as_matrix(w_.value.values, d_, 3 * h_).transpose();
    dh0_ = Tensor<T>({batch_, h_});
    as_matrix(dh0_.values, batch_, h_) = dh;
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&w_, &u_, &b_}; }
  Param<T>& W() { return w_; }
  Param<T>& U() { return u_; }
  Param<T>& b() { return b_; }

 private:
  std::size_t d_, h_;
  bool seq_;
  Param<T> w_, u_, b_;
  Tensor<T> h0_, dh0_;
  std::size_t batch_ = 0, steps_ = 0;
  Tensor<T> x_;
  std::vector<T> gx_, z_, r_, c_, hs_;
};

// ---------------------------------------------------------------------------

/// y = x W + b with x [B, D], W [D, M].
template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t d_in, std::size_t d_out) : d_(d_in), m_(d_out), w_("weight", {d_in, d_out}), b_("bias", {d_out}) {}

  std::string kind() const override { return "dense"; }

  Shape output_shape(const Shape& in) const override {
    expect_rank(in, 2, "dense");
    if (in[1] != d_) throw Error(Errc::ShapeMismatch, "dense input width mismatch: " + shape_str(in));
    return {in[0], m_};
  }

  void init(Rng& rng) override {
    init_uniform(w_.value, std::sqrt(6.0 / static_cast<double>(d_ + m_)), rng);
    b_.value.fill(T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, Mode) override {
    Tensor<T> y(output_shape(x.shape));
    x_ = x;
    auto ym = as_matrix(y.values, x.shape[0], m_);
    ym.noalias() = as_matrix(x.values, x.shape[0], d_) * as_matrix(w_.value.values, d_, m_);
    ym.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.value.data(), static_cast<Eigen::Index>(m_));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t n = x_.shape[0];
    const auto g = as_matrix(dy.values, n, m_);
    as_matrix(w_.grad.values, d_, m_).noalias() += as_matrix(x_.values, n, d_).transpose() * g;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b_.grad.data(), static_cast<Eigen::Index>(m_)) += g.colwise().sum();
    Tensor<T> dx({n, d_});
    as_matrix(dx.values, n, d_).noalias() = g * as_matrix(w_.value.values, d_, m_).transpose();
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&w_, &b_}; }
  Param<T>& weight() { return w_; }
  Param<T>& bias() { return b_; }

 private:
  std::size_t d_, m_;
  Param<T> w_, b_;
  Tensor<T> x_;
};

}  // namespace scgnet::nn
