#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "scgnet/nn/grad_check.hpp"
#include "scgnet/nn/layers.hpp"
#include "scgnet/nn/loss.hpp"

using namespace scgnet;
using namespace scgnet::nn;

namespace {

constexpr double kEps = 1e-3;
constexpr double kTol = 1e-3;

// Random values bounded away from 0 so relu-style kinks are never straddled
// by a +-eps perturbation.
Tensor<float> random_input(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Rng rng(seed);
  Tensor<float> t(std::move(shape));
  for (auto& v : t.values) {
    double x;
    do {
      x = rng.uniform(lo, hi);
    } while (std::fabs(x) < 0.05);
    v = static_cast<float>(x);
  }
  return t;
}

// Analytic gradients at float32; finite differences on a float64 twin.
void expect_grad_ok(Layer<float>& layer, Layer<double>& twin, const Tensor<float>& x, std::uint64_t seed,
                    double tol = kTol) {
  const auto res = grad_check(layer, twin, x, kEps, seed);
  EXPECT_LT(res.max_rel_error, tol) << layer.kind() << " on " << shape_str(x.shape) << ": worst "
                                    << res.worst_tensor << "[" << res.worst_index << "] analytic "
                                    << res.worst_analytic << " numeric " << res.worst_numeric;
}

}  // namespace

TEST(Conv1d, ZeroInputGivesZeroOutput) {
  Conv1d<float> conv(1, 3, 2);
  Rng rng(1);
  conv.init(rng);
  const auto y = conv.forward(Tensor<float>({1, 1, 3}), Mode::Train);
  EXPECT_EQ(y.shape, (Shape{1, 3, 2}));
  for (float v : y.values) EXPECT_EQ(v, 0.0f);
}

TEST(Conv1d, HandComputedSum) {
  Conv1d<float> conv(1, 1, 2);
  conv.weight().value.values = {1.0f, 1.0f};
  const auto y = conv.forward(Tensor<float>({1, 1, 3}, {1, 2, 3}), Mode::Train);
  EXPECT_EQ(y.values, (std::vector<float>{3, 5}));
}

TEST(Conv1d, MatchesDirectSummation) {
  Conv1d<float> conv(3, 4, 3);
  Rng rng(7);
  conv.init(rng);
  for (auto& b : conv.bias().value.values) b = static_cast<float>(rng.uniform(-1, 1));
  const auto x = random_input({2, 3, 9}, 11);
  const auto y = conv.forward(x, Mode::Train);
  const auto& w = conv.weight().value;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t t = 0; t < 7; ++t) {
        double s = conv.bias().value[o];
        for (std::size_t c = 0; c < 3; ++c)
          for (std::size_t k = 0; k < 3; ++k) s += x[(b * 3 + c) * 9 + t + k] * w[(o * 3 + c) * 3 + k];
        EXPECT_NEAR(y[(b * 4 + o) * 7 + t], s, 1e-5);
      }
}

TEST(Conv1d, KernelLongerThanInputUnderflows) {
  Conv1d<float> conv(1, 1, 5);
  try {
    conv.output_shape({1, 1, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeUnderflow);
  }
  EXPECT_THROW(conv.output_shape({1, 2, 8}), Error);
}

TEST(Conv1d, GradientCheck) {
  Rng rng(3);
  for (const auto& [shape, k, cout] : std::vector<std::tuple<Shape, std::size_t, std::size_t>>{
           {{2, 3, 7}, 2, 4}, {{1, 1, 12}, 5, 3}, {{3, 2, 9}, 7, 2}}) {
    Conv1d<float> conv(shape[1], cout, k);
    Conv1d<double> twin(shape[1], cout, k);
    conv.init(rng);
    expect_grad_ok(conv, twin, random_input(shape, rng.next()), rng.next());
  }
}

TEST(MaxPool1d, WindowedMax) {
  MaxPool1d<float> pool;
  EXPECT_EQ(pool.forward(Tensor<float>({1, 1, 4}, {1, 3, 2, 2}), Mode::Train).values, (std::vector<float>{3, 2}));
  EXPECT_EQ(pool.forward(Tensor<float>({1, 1, 5}, {1, 2, 3, 4, 9}), Mode::Train).values,
            (std::vector<float>{2, 4}));
}

TEST(MaxPool1d, TieRoutesGradientToFirstIndex) {
  MaxPool1d<float> pool;
  pool.forward(Tensor<float>({1, 1, 2}, {7, 7}), Mode::Train);
  const auto dx = pool.backward(Tensor<float>({1, 1, 1}, {1}));
  EXPECT_EQ(dx.values, (std::vector<float>{1, 0}));
}

TEST(MaxPool1d, GradientCheck) {
  Rng rng(5);
  for (const Shape& shape : {Shape{2, 3, 8}, Shape{1, 4, 7}, Shape{3, 1, 10}}) {
    // Distinct values spaced far wider than eps so no window flips.
    Tensor<float> x(shape);
    std::vector<std::size_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.05f * static_cast<float>(perm[i]) - 1.0f;
    MaxPool1d<float> pool;
    MaxPool1d<double> twin;
    expect_grad_ok(pool, twin, x, rng.next());
  }
}

TEST(BatchNorm, IdentityOnStandardizedBatch) {
  BatchNorm<float> bn(1, ChannelAxis::Middle);
  // mean 0, population variance 1
  const Tensor<float> x({2, 1, 2}, {1, -1, 1, -1});
  const auto y = bn.forward(x, Mode::Train);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-5);
}

TEST(BatchNorm, ConstantChannelGivesBeta) {
  BatchNorm<float> bn(2, ChannelAxis::Middle);
  bn.beta().value.values = {0.5f, -0.25f};
  const auto y = bn.forward(Tensor<float>({3, 2, 2}, 4.0f), Mode::Train);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const float beta = ((i / 2) % 2 == 0) ? 0.5f : -0.25f;
    EXPECT_NEAR(y[i], beta, 1e-6);
    EXPECT_TRUE(std::isfinite(y[i]));
  }
}

TEST(BatchNorm, EvalBeforeTrainingThrows) {
  BatchNorm<float> bn(2, ChannelAxis::Last);
  try {
    bn.forward(Tensor<float>({2, 2}, 1.0f), Mode::Eval);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnpopulatedRunningStats);
  }
}

TEST(BatchNorm, RunningStatsUseMomentum) {
  BatchNorm<float> bn(1, ChannelAxis::Last);
  bn.forward(Tensor<float>({2, 1}, {1, 3}), Mode::Train);
  EXPECT_NEAR(bn.running_mean()[0], 0.1 * 2.0, 1e-6);
  // unbiased variance of {1,3} is 2
  EXPECT_NEAR(bn.running_var()[0], 0.9 * 1.0 + 0.1 * 2.0, 1e-6);
  const auto y = bn.forward(Tensor<float>({1, 1}, {0.2f}), Mode::Eval);
  EXPECT_NEAR(y[0], (0.2 - 0.2) / std::sqrt(1.1 + 1e-5), 1e-6);
}

TEST(BatchNorm, GradientCheck) {
  Rng rng(9);
  for (const Shape& shape : {Shape{4, 3, 5}, Shape{2, 2, 6}, Shape{3, 4, 3}}) {
    BatchNorm<float> bn(shape[1], ChannelAxis::Middle);
    BatchNorm<double> twin(shape[1], ChannelAxis::Middle);
    for (auto& g : bn.gamma().value.values) g = static_cast<float>(rng.uniform(0.5, 1.5));
    for (auto& b : bn.beta().value.values) b = static_cast<float>(rng.uniform(-0.5, 0.5));
    expect_grad_ok(bn, twin, random_input(shape, rng.next()), rng.next());
  }
  for (const Shape& shape : {Shape{2, 5, 3}, Shape{6, 4}, Shape{3, 3, 2}}) {
    BatchNorm<float> bn(shape.back(), ChannelAxis::Last);
    BatchNorm<double> twin(shape.back(), ChannelAxis::Last);
    expect_grad_ok(bn, twin, random_input(shape, rng.next()), rng.next());
  }
}

TEST(Dropout, RateZeroIsIdentity) {
  Dropout<float> d(0.0, 1);
  const auto x = random_input({3, 4}, 1);
  EXPECT_EQ(d.forward(x, Mode::Train), x);
  EXPECT_EQ(d.forward(x, Mode::Eval), x);
}

TEST(Dropout, EvalIsIdentity) {
  Dropout<float> d(0.5, 1);
  const auto x = random_input({3, 4}, 2);
  EXPECT_EQ(d.forward(x, Mode::Eval), x);
}

TEST(Dropout, SurvivorFractionAndMeanPreserved) {
  Dropout<float> d(0.2, 42);
  const std::size_t n = 100000;
  const Tensor<float> x({n}, 1.0f);
  const auto y = d.forward(x, Mode::Train);
  std::size_t survivors = 0;
  double sum = 0.0;
  for (float v : y.values) {
    survivors += v != 0.0f;
    sum += v;
  }
  const double p = 0.8;
  const double sigma = std::sqrt(n * p * (1 - p));
  EXPECT_LT(std::fabs(static_cast<double>(survivors) - n * p), 3 * sigma);
  EXPECT_NEAR(sum / n, 1.0, 0.02);
}

TEST(Dropout, MaskDependsOnlyOnStep) {
  Dropout<float> d(0.5, 7);
  const auto x = random_input({64}, 3);
  d.set_step(4);
  const auto a = d.forward(x, Mode::Train);
  d.set_step(5);
  const auto b = d.forward(x, Mode::Train);
  d.set_step(4);
  const auto c = d.forward(x, Mode::Train);
  EXPECT_EQ(a, c);
  EXPECT_NE(a, b);
}

TEST(Dropout, GradientCheckWithFixedStep) {
  Rng rng(13);
  for (const Shape& shape : {Shape{2, 3, 4}, Shape{5, 6}, Shape{1, 20}}) {
    const auto seed = rng.next();
    Dropout<float> d(0.3, seed);
    Dropout<double> twin(0.3, seed);
    d.set_step(3);
    twin.set_step(3);
    expect_grad_ok(d, twin, random_input(shape, rng.next()), rng.next());
  }
}

TEST(Gru, ZeroParametersStayAtZero) {
  Gru<float> gru(3, 4);
  const auto y = gru.forward(random_input({2, 5, 3}, 1), Mode::Train);
  EXPECT_EQ(y.shape, (Shape{2, 5, 4}));
  for (float v : y.values) EXPECT_EQ(v, 0.0f);
}

TEST(Gru, SaturatedUpdateGateTakesCandidate) {
  Gru<float> gru(1, 1);
  const float c = 0.7f;
  // b = [b_z, b_r, b_c]
  gru.b().value.values = {50.0f, 0.0f, c};
  const auto y = gru.forward(Tensor<float>({1, 1, 1}, {0.0f}), Mode::Train);
  EXPECT_NEAR(y[0], std::tanh(c), 1e-6);
}

TEST(Gru, LastStateMode) {
  Gru<float> seq(2, 3, true), last(2, 3, false);
  Rng a(5), b(5);
  seq.init(a);
  last.init(b);
  const auto x = random_input({2, 4, 2}, 8);
  const auto ys = seq.forward(x, Mode::Train);
  const auto yl = last.forward(x, Mode::Train);
  ASSERT_EQ(yl.shape, (Shape{2, 3}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(yl[n * 3 + j], ys[(n * 4 + 3) * 3 + j]);
}

TEST(Gru, GradientCheck) {
  Rng rng(17);
  for (const auto& [shape, h] : std::vector<std::pair<Shape, std::size_t>>{
           {{2, 4, 3}, 5}, {{1, 6, 2}, 3}, {{3, 3, 4}, 2}}) {
    Gru<float> gru(shape[2], h);
    Gru<double> twin(shape[2], h);
    gru.init(rng);
    for (auto& v : gru.b().value.values) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    expect_grad_ok(gru, twin, random_input(shape, rng.next(), -1.0, 1.0), rng.next());
  }
  Gru<float> last(3, 4, false);
  Gru<double> last_twin(3, 4, false);
  last.init(rng);
  expect_grad_ok(last, last_twin, random_input({2, 5, 3}, rng.next(), -1.0, 1.0), rng.next());
}

TEST(Gru, InitialStateGradient) {
  Gru<float> gru(2, 3);
  Rng rng(21);
  gru.init(rng);
  auto h0 = random_input({2, 3}, 4, -0.5, 0.5);
  const auto x = random_input({2, 3, 2}, 5, -1.0, 1.0);
  Tensor<float> w({2, 3, 3}, 1.0f);
  auto f = [&]() {
    gru.set_initial_state(h0);
    const auto y = gru.forward(x, Mode::Train);
    double s = 0;
    for (float v : y.values) s += v;
    return s;
  };
  f();
  gru.backward(w);
  std::vector<GradTarget<float>> targets{{"h0", &h0.values, widen(gru.initial_state_grad().values)}};
  EXPECT_LT(compare_gradients<float>(f, targets, kEps).max_rel_error, kTol);
}

TEST(Dense, IdentityWeights) {
  Dense<float> dense(3, 3);
  dense.weight().value.values = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const auto x = random_input({2, 3}, 1);
  EXPECT_EQ(dense.forward(x, Mode::Train), x);
}

TEST(Dense, HandArithmetic) {
  Dense<float> dense(2, 1);
  dense.weight().value.values = {1, 1};
  dense.bias().value.values = {1};
  EXPECT_EQ(dense.forward(Tensor<float>({1, 2}, {1, 2}), Mode::Train).values, (std::vector<float>{4}));
}

TEST(Dense, GradientCheck) {
  Rng rng(23);
  for (const auto& [shape, m] : std::vector<std::pair<Shape, std::size_t>>{{{3, 4}, 2}, {{1, 7}, 5}, {{6, 2}, 3}}) {
    Dense<float> dense(shape[1], m);
    Dense<double> twin(shape[1], m);
    dense.init(rng);
    expect_grad_ok(dense, twin, random_input(shape, rng.next()), rng.next());
  }
}

TEST(Activation, PointValues) {
  const Tensor<float> x({3}, {-1.0f, 2.0f, 7.0f});
  EXPECT_EQ(activate(x, ActivationKind::Relu).values, (std::vector<float>{0, 2, 7}));
  EXPECT_EQ(activate(x, ActivationKind::Relu6).values, (std::vector<float>{0, 2, 6}));
  EXPECT_NEAR(activate(x, ActivationKind::Elu)[0], std::expm1(-1.0), 1e-7);
}

TEST(Activation, SoftmaxOfConstantIsUniform) {
  const auto y = activate(Tensor<float>({1, 5}, 3.3f), ActivationKind::Softmax);
  double sum = 0;
  for (float v : y.values) {
    EXPECT_NEAR(v, 0.2, 1e-7);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(Activation, SoftmaxRowsSumToOneForExtremeInputs) {
  Rng rng(2);
  Tensor<float> x({50, 5});
  for (auto& v : x.values) v = static_cast<float>(rng.uniform(-80, 80));
  const auto y = activate(x, ActivationKind::Softmax);
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_TRUE(std::isfinite(y[r * 5 + j]));
      s += y[r * 5 + j];
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Activation, SigmoidStaysInOpenInterval) {
  const auto y = activate(Tensor<float>({4}, {-20.0f, -1.0f, 1.0f, 15.0f}), ActivationKind::Sigmoid);
  for (float v : y.values) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Activation, GradientCheckAllKinds) {
  Rng rng(29);
  for (auto kind : {ActivationKind::Relu, ActivationKind::Elu, ActivationKind::Relu6, ActivationKind::Softmax}) {
    for (const Shape& shape : {Shape{2, 5}, Shape{3, 2, 4}, Shape{1, 9}}) {
      Activation<float> act(kind);
      Activation<double> twin(kind);
      // relu6 kink at 6 is outside [-5, 5]
      expect_grad_ok(act, twin, random_input(shape, rng.next(), -5.0, 5.0), rng.next());
    }
  }
  for (const Shape& shape : {Shape{2, 5}, Shape{3, 2, 4}, Shape{1, 9}}) {
    Activation<float> act(ActivationKind::Sigmoid);
    Activation<double> twin(ActivationKind::Sigmoid);
    expect_grad_ok(act, twin, random_input(shape, rng.next(), -4.0, 4.0), rng.next(), 1e-4);
  }
}

TEST(ShapeLayers, TransposeAndFlattenGradientCheck) {
  Rng rng(31);
  for (const Shape& shape : {Shape{2, 3, 4}, Shape{1, 5, 2}, Shape{3, 1, 6}}) {
    ChannelsToSteps<float> tr;
    ChannelsToSteps<double> tr_twin;
    EXPECT_EQ(tr.output_shape(shape), (Shape{shape[0], shape[2], shape[1]}));
    expect_grad_ok(tr, tr_twin, random_input(shape, rng.next()), rng.next());
    Flatten<float> fl;
    Flatten<double> fl_twin;
    EXPECT_EQ(fl.output_shape(shape), (Shape{shape[0], shape[1] * shape[2]}));
    expect_grad_ok(fl, fl_twin, random_input(shape, rng.next()), rng.next());
  }
}

TEST(ShapeAlgebra, PaperBlocksFrom122) {
  // conv(K=2) then pool(2), twice
  Conv1d<float> c1(1, 32, 2), c2(32, 64, 2);
  MaxPool1d<float> p;
  Shape s{1, 1, 122};
  std::vector<std::size_t> lengths{s[2]};
  s = c1.output_shape(s);
  lengths.push_back(s[2]);
  s = p.output_shape(s);
  lengths.push_back(s[2]);
  s = c2.output_shape(s);
  lengths.push_back(s[2]);
  s = p.output_shape(s);
  lengths.push_back(s[2]);
  EXPECT_EQ(lengths, (std::vector<std::size_t>{122, 121, 60, 59, 29}));
}

TEST(Loss, HalfProbabilityIsLn2) {
  const auto r0 = loss(Tensor<float>({2, 1}, 0.5f), Tensor<float>({2, 1}, {0, 1}), LossKind::BinaryCrossEntropy);
  EXPECT_NEAR(r0.value, std::log(2.0), 1e-7);
}

TEST(Loss, PerfectPredictionNearZero) {
  const auto r = loss(Tensor<float>({1, 3}, {0, 1, 0}), Tensor<float>({1, 3}, {0, 1, 0}),
                      LossKind::CategoricalCrossEntropy);
  EXPECT_GE(r.value, 0.0);
  EXPECT_LT(r.value, 1e-6);
}

TEST(Loss, ShapeMismatchThrows) {
  EXPECT_THROW(loss(Tensor<float>({2, 1}), Tensor<float>({1, 2}), LossKind::BinaryCrossEntropy), Error);
}

TEST(Loss, GradientCheck) {
  Rng rng(37);
  for (auto kind : {LossKind::BinaryCrossEntropy, LossKind::CategoricalCrossEntropy}) {
    Tensor<float> p({4, 3}), t({4, 3});
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = static_cast<float>(rng.uniform(0.1, 0.9));
      t[i] = static_cast<float>(rng.below(2));
    }
    const auto analytic = loss(p, t, kind).grad;
    std::vector<GradTarget<float>> targets{{"pred", &p.values, widen(analytic.values)}};
    const auto res = compare_gradients<float>([&] { return loss(p, t, kind).value; }, targets, kEps);
    EXPECT_LT(res.max_rel_error, kTol);
  }
}

TEST(GradCheck, CorruptedBackwardIsDetected) {
  // A dense layer whose backward flips the sign of the input gradient.
  class Broken final : public Layer<float> {
   public:
    Broken() : inner_(3, 2) {
      Rng rng(1);
      inner_.init(rng);
    }
    std::string kind() const override { return "broken"; }
    Shape output_shape(const Shape& in) const override { return inner_.output_shape(in); }
    Tensor<float> forward(const Tensor<float>& x, Mode m) override { return inner_.forward(x, m); }
    Tensor<float> backward(const Tensor<float>& dy) override {
      auto dx = inner_.backward(dy);
      for (auto& v : dx.values) v = -v;
      return dx;
    }
    std::vector<Param<float>*> params() override { return inner_.params(); }

   private:
    Dense<float> inner_;
  };
  Broken b;
  const auto res = grad_check(b, random_input({2, 3}, 3), kEps, 4);
  EXPECT_GT(res.max_rel_error, 0.1);
  EXPECT_FALSE(res.passed(kTol));
}
