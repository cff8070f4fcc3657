#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "r2/error.hpp"
#include "r2/net.hpp"

using namespace r2;
using namespace r2::net;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(MlpShape, RejectsDegenerateShapes) {
  EXPECT_THROW((MlpShape{{3}, OutputActivation::Identity}.validate()), ConfigError);
  EXPECT_THROW((MlpShape{{3, 0, 1}, OutputActivation::Identity}.validate()), ConfigError);
  EXPECT_NO_THROW((MlpShape{{3, 1}, OutputActivation::Identity}.validate()));
}

TEST(MlpShape, ParamCountMatchesLayerSizes) {
  MlpShape s{{6, 64, 64, 1}, OutputActivation::Identity};
  EXPECT_EQ(param_count(s), 6u * 64 + 64 + 64 * 64 + 64 + 64 + 1);
  const auto views = layout(s);
  ASSERT_EQ(views.size(), 3u);
  EXPECT_EQ(views[0].offset, 0u);
  EXPECT_EQ(views[1].offset, views[0].size());
  EXPECT_EQ(views[2].offset + views[2].size(), param_count(s));
}

TEST(InitMlp, DeterministicBoundedAndZeroBias) {
  MlpShape s{{5, 16, 3}, OutputActivation::Tanh};
  const ParamSet a = init_mlp(s, 42);
  EXPECT_EQ(a, init_mlp(s, 42));
  EXPECT_NE(a, init_mlp(s, 43));
  for (std::size_t l = 0; l < a.views.size(); ++l) {
    const auto& v = a.views[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(v.cols));
    for (std::size_t i = 0; i < v.weight_count(); ++i) EXPECT_LE(std::abs(a.flat[v.offset + i]), bound);
    for (int r = 0; r < v.rows; ++r) EXPECT_EQ(a.flat[v.bias_offset() + r], 0.0);
  }
}

TEST(Forward, MatchesPerNeuronOracle) {
  std::mt19937_64 rng(1);
  for (auto out : {OutputActivation::Identity, OutputActivation::Tanh, OutputActivation::GaussianHead}) {
    MlpShape s{{7, 13, 9, 4}, out};
    ParamSet p = init_mlp(s, 5);
    p.flat = random_vector(rng, p.size(), 0.5);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_vector(rng, 7);
      const auto got = forward(p, s, x);
      const auto want = oracle::mlp(p, s, x);
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
    }
  }
}

TEST(Forward, BatchColumnsMatchSingleSample) {
  std::mt19937_64 rng(2);
  MlpShape s{{3, 8, 2}, OutputActivation::Tanh};
  const ParamSet p = init_mlp(s, 9);
  Matrix X(3, 5);
  for (int c = 0; c < 5; ++c) {
    for (int r = 0; r < 3; ++r) X(r, c) = std::normal_distribution<double>()(rng);
  }
  const Matrix Y = forward_batch(p, s, X);
  for (int c = 0; c < 5; ++c) {
    const std::vector<double> x{X(0, c), X(1, c), X(2, c)};
    const auto y = forward(p, s, x);
    EXPECT_DOUBLE_EQ(Y(0, c), y[0]);
    EXPECT_DOUBLE_EQ(Y(1, c), y[1]);
  }
}

TEST(Forward, RejectsWrongInputLength) {
  MlpShape s{{3, 4, 1}, OutputActivation::Identity};
  const ParamSet p = init_mlp(s, 1);
  const std::vector<double> x{1.0, 2.0};
  EXPECT_THROW(forward(p, s, x), InputError);
}

TEST(Backward, MatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  for (auto out : {OutputActivation::Identity, OutputActivation::Tanh}) {
    MlpShape s{{4, 10, 10, 3}, out};
    const ParamSet p = init_mlp(s, 11);
    const auto x = random_vector(rng, 4);
    const auto og = random_vector(rng, 3);
    const Gradients g = backward(p, s, x, og);
    const double err = finite_diff_check(
        p, [&](const ParamSet& q) { return dot(forward(q, s, x), og); }, g.params, 1e-6);
    EXPECT_LE(err, 1e-5);

    // Input gradient against differences in the input.
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto xp = x, xm = x;
      xp[i] += 1e-6;
      xm[i] -= 1e-6;
      const double num = (dot(forward(p, s, xp), og) - dot(forward(p, s, xm), og)) / 2e-6;
      EXPECT_NEAR(g.input[i], num, 1e-6 * std::max(1.0, std::abs(num)));
    }
  }
}

TEST(Backward, AccumulatesIntoExistingGradients) {
  MlpShape s{{2, 5, 1}, OutputActivation::Identity};
  const ParamSet p = init_mlp(s, 4);
  Matrix x(2, 3);
  x << 0.1, -0.4, 0.7, 0.3, 0.2, -0.9;
  Activations cache;
  forward_batch(p, s, x, &cache);
  const Matrix og = Matrix::Ones(1, 3);
  std::vector<double> once(p.size(), 0.0), twice(p.size(), 0.0);
  backward_batch(p, s, cache, og, once);
  backward_batch(p, s, cache, og, twice);
  backward_batch(p, s, cache, og, twice);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(twice[i], 2.0 * once[i]);
}

TEST(Adam, MatchesScalarTrace) {
  // Hand-rolled scalar Adam on f(x) = (x - 3)^2 from x = 0.
  AdamConfig cfg;
  cfg.lr = 0.1;
  ParamSet p;
  p.flat = {0.0};
  AdamState st = AdamState::zeros(1);
  double x = 0.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 50; ++t) {
    const double g = 2.0 * (x - 3.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1.0 - std::pow(0.9, t));
    const double vh = v / (1.0 - std::pow(0.999, t));
    x -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    const std::vector<double> grad{2.0 * (p.flat[0] - 3.0)};
    adam_step(p, grad, st, cfg);
    ASSERT_NEAR(p.flat[0], x, 1e-12 * std::max(1.0, std::abs(x))) << "step " << t;
  }
  EXPECT_EQ(st.t, 50u);
}

TEST(Adam, FirstStepMovesEachCoordinateByLearningRate) {
  ParamSet p;
  p.flat = {1.0, -2.0, 0.5};
  AdamState st = AdamState::zeros(3);
  const std::vector<double> g{3.0, -0.01, 100.0};
  adam_step(p, g, st, AdamConfig{});
  EXPECT_NEAR(p.flat[0], 1.0 - 3e-4, 1e-10);
  EXPECT_NEAR(p.flat[1], -2.0 + 3e-4, 1e-9);
  EXPECT_NEAR(p.flat[2], 0.5 - 3e-4, 1e-10);
}

TEST(Adam, RejectsMismatchedLengthsAndBadBetas) {
  ParamSet p;
  p.flat = {1.0, 2.0};
  AdamState st = AdamState::zeros(2);
  const std::vector<double> g{1.0};
  EXPECT_THROW(adam_step(p, g, st, AdamConfig{}), InputError);
  const std::vector<double> g2{1.0, 1.0};
  AdamConfig bad;
  bad.beta1 = 1.0;
  EXPECT_THROW(adam_step(p, g2, st, bad), ConfigError);
}

TEST(L2, ValueAndGradient) {
  ParamSet p;
  p.flat = {1.0, -2.0, 3.0};
  std::vector<double> g(3, 1.0);
  EXPECT_DOUBLE_EQ(add_l2(p, 0.5, g), 0.5 * 14.0);
  EXPECT_DOUBLE_EQ(g[0], 2.0);
  EXPECT_DOUBLE_EQ(g[1], -1.0);
  EXPECT_DOUBLE_EQ(g[2], 4.0);
}

TEST(GaussianHead, ClampsLogStd) {
  const std::vector<double> raw{0.1, -0.2, -50.0, 9.0};
  const auto h = GaussianHeadOutput::from_raw(raw);
  EXPECT_EQ(h.mean, (std::vector<double>{0.1, -0.2}));
  EXPECT_EQ(h.log_std, (std::vector<double>{kLogStdMin, kLogStdMax}));
  const std::vector<double> odd{1.0, 2.0, 3.0};
  EXPECT_THROW(GaussianHeadOutput::from_raw(odd), InputError);
}

TEST(GaussianHead, SampleStaysInBoundsAndZeroNoiseGivesSquashedMean) {
  const std::vector<double> low{-0.05, -1.0}, high{0.05, 3.0};
  GaussianHeadOutput h{{0.3, -4.0}, {0.0, 1.0}};
  const auto s0 = gaussian_sample(h, std::vector<double>{0.0, 0.0}, low, high);
  EXPECT_NEAR(s0.action[0], 0.05 * std::tanh(0.3), 1e-15);
  EXPECT_NEAR(s0.action[1], 1.0 + 2.0 * std::tanh(-4.0), 1e-15);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const auto s = gaussian_sample(h, random_vector(rng, 2, 3.0), low, high);
    EXPECT_GE(s.action[0], low[0]);
    EXPECT_LE(s.action[0], high[0]);
    EXPECT_GE(s.action[1], low[1]);
    EXPECT_LE(s.action[1], high[1]);
  }
}

TEST(GaussianHead, LogProbMatchesDerivativeOfCdf) {
  // 1-D: P(A <= a) = Phi((atanh((a - c) / h) - mu) / sigma); its numerical
  // derivative is the density the head should report.
  const double mu = 0.4, ls = -0.3, low = -2.0, high = 1.0;
  const double c = 0.5 * (low + high), half = 0.5 * (high - low);
  auto cdf = [&](double a) {
    const double u = std::atanh((a - c) / half);
    return 0.5 * std::erfc(-(u - mu) / std::exp(ls) / std::sqrt(2.0));
  };
  GaussianHeadOutput h{{mu}, {ls}};
  for (double eps : {-1.7, -0.6, 0.0, 0.4, 1.1}) {
    const auto s = gaussian_sample(h, std::vector<double>{eps}, std::vector<double>{low},
                                   std::vector<double>{high});
    const double a = s.action[0];
    const double da = 1e-6;
    const double density = (cdf(a + da) - cdf(a - da)) / (2 * da);
    EXPECT_NEAR(s.log_prob, std::log(density), 1e-6) << "eps=" << eps;
  }
}

TEST(GaussianHead, MultiDimLogProbIsSumOfMarginals) {
  GaussianHeadOutput h{{0.1, -0.5, 0.9}, {-1.0, 0.2, 0.0}};
  const std::vector<double> noise{0.3, -1.2, 0.7};
  const std::vector<double> low{-1, -0.05, 0}, high{1, 0.05, 2};
  const auto s = gaussian_sample(h, noise, low, high);
  const auto ref = oracle::squashed(h.mean, h.log_std, noise, {1.0, 0.05, 1.0});
  EXPECT_NEAR(s.log_prob, ref.log_prob, 1e-12);
}

TEST(GaussianHead, Log1mTanhSqStableForLargeArguments) {
  for (double u : {-0.3, 0.0, 1.5, 4.0}) {
    EXPECT_NEAR(log1m_tanh_sq(u), std::log(1.0 - std::tanh(u) * std::tanh(u)), 1e-12);
  }
  // log(4) - 2|u| asymptotically.
  EXPECT_NEAR(log1m_tanh_sq(40.0), std::log(4.0) - 80.0, 1e-9);
  EXPECT_NEAR(log1m_tanh_sq(-40.0), std::log(4.0) - 80.0, 1e-9);
  EXPECT_TRUE(std::isfinite(log1m_tanh_sq(1e4)));
}

TEST(FiniteDiff, DetectsWrongGradient) {
  ParamSet p;
  p.flat = {0.3, -1.1};
  auto loss = [](const ParamSet& q) { return q.flat[0] * q.flat[0] + 3.0 * q.flat[1]; };
  const std::vector<double> right{0.6, 3.0}, wrong{0.6, 2.9};
  EXPECT_LE(finite_diff_check(p, loss, right, 1e-6), 1e-8);
  EXPECT_GT(finite_diff_check(p, loss, wrong, 1e-6), 1e-2);
}

TEST(Checkpoint, RoundTripIsExact) {
  MlpShape s{{6, 32, 32, 4}, OutputActivation::GaussianHead};
  const ParamSet p = init_mlp(s, 77);
  std::stringstream buf;
  write_checkpoint(buf, s, p);
  MlpShape s2;
  ParamSet p2;
  read_checkpoint(buf, s2, p2);
  EXPECT_EQ(s2, s);
  EXPECT_EQ(p2, p);
}

TEST(Checkpoint, TruncatedStreamIsParseError) {
  MlpShape s{{2, 3, 1}, OutputActivation::Tanh};
  const ParamSet p = init_mlp(s, 1);
  std::stringstream buf;
  write_checkpoint(buf, s, p);
  const std::string full = buf.str();
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, full.size() / 2, full.size() - 1}) {
    std::stringstream in(full.substr(0, cut));
    MlpShape s2;
    ParamSet p2;
    EXPECT_THROW(read_checkpoint(in, s2, p2), ParseError) << "cut at " << cut;
  }
}
