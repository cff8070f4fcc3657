#include "r2/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "r2/error.hpp"

namespace r2::net {

namespace {

using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using MatMap = Eigen::Map<Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

ConstMatMap weights(const ParamSet& p, const LayerView& v) {
  return ConstMatMap(p.flat.data() + v.offset, v.rows, v.cols);
}

ConstVecMap biases(const ParamSet& p, const LayerView& v) {
  return ConstVecMap(p.flat.data() + v.bias_offset(), v.rows);
}

void check_params(const ParamSet& params, const MlpShape& shape) {
  shape.validate();
  if (params.flat.size() != param_count(shape) || params.views.size() != shape.num_layers()) {
    throw InputError("parameter set does not match network shape");
  }
}

}  // namespace

void MlpShape::validate() const {
  if (layer_sizes.size() < 2) {
    throw ConfigError("an MLP needs at least an input and an output layer");
  }
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("layer sizes must be >= 1, got " + std::to_string(s));
  }
  if (output == OutputActivation::GaussianHead && layer_sizes.back() % 2 != 0) {
    throw ConfigError("a Gaussian head needs an even output size (mean and log-std)");
  }
}

std::vector<LayerView> layout(const MlpShape& shape) {
  shape.validate();
  std::vector<LayerView> views;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < shape.layer_sizes.size(); ++l) {
    LayerView v{shape.layer_sizes[l + 1], shape.layer_sizes[l], offset};
    offset += v.size();
    views.push_back(v);
  }
  return views;
}

std::size_t param_count(const MlpShape& shape) {
  std::size_t n = 0;
  for (const auto& v : layout(shape)) n += v.size();
  return n;
}

ParamSet init_mlp(const MlpShape& shape, std::uint64_t seed) {
  ParamSet p;
  p.views = layout(shape);
  p.flat.assign(param_count(shape), 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& v : p.views) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(v.cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < v.weight_count(); ++i) p.flat[v.offset + i] = dist(rng);
  }
  return p;
}

Matrix forward_batch(const ParamSet& params, const MlpShape& shape, const Matrix& input,
                     Activations* cache) {
  check_params(params, shape);
  if (input.rows() != shape.input_size()) {
    throw InputError("input has " + std::to_string(input.rows()) + " rows, network expects " +
                     std::to_string(shape.input_size()));
  }
  if (cache) {
    cache->layers.clear();
    cache->layers.reserve(params.views.size() + 1);
    cache->layers.push_back(input);
  }
  Matrix x = input;
  for (std::size_t l = 0; l < params.views.size(); ++l) {
    const auto& v = params.views[l];
    Matrix z = weights(params, v) * x;
    z.colwise() += biases(params, v);
    const bool last = l + 1 == params.views.size();
    if (!last) {
      z = z.cwiseMax(0.0);
    } else if (shape.output == OutputActivation::Tanh) {
      z = z.array().tanh().matrix();
    }
    if (cache) cache->layers.push_back(z);
    x = std::move(z);
  }
  return x;
}

void backward_batch(const ParamSet& params, const MlpShape& shape, const Activations& cache,
                    const Matrix& output_grad, std::span<double> param_grads,
                    Matrix* input_grad) {
  check_params(params, shape);
  const bool want_params = !param_grads.empty();
  if (want_params && param_grads.size() != params.flat.size()) {
    throw InputError("gradient buffer length does not match parameter count");
  }
  if (cache.layers.size() != params.views.size() + 1) {
    throw InputError("activation cache does not match network depth");
  }
  const Matrix& out = cache.layers.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw InputError("output gradient shape does not match network output");
  }

  Matrix g = output_grad;
  if (shape.output == OutputActivation::Tanh) {
    g.array() *= (1.0 - out.array().square());
  }
  for (std::size_t l = params.views.size(); l-- > 0;) {
    const auto& v = params.views[l];
    const Matrix& a_in = cache.layers[l];
    if (want_params) {
      MatMap dw(param_grads.data() + v.offset, v.rows, v.cols);
      VecMap db(param_grads.data() + v.bias_offset(), v.rows);
      dw.noalias() += g * a_in.transpose();
      db += g.rowwise().sum();
    }
    if (l == 0 && input_grad == nullptr) break;
    Matrix g_in = weights(params, v).transpose() * g;
    if (l > 0) {
      g_in.array() *= (a_in.array() > 0.0).cast<double>();
      g = std::move(g_in);
    } else {
      *input_grad = std::move(g_in);
    }
  }
}

Vector forward(const ParamSet& params, const MlpShape& shape, std::span<const double> input) {
  shape.validate();
  if (input.size() != static_cast<std::size_t>(shape.input_size())) {
    throw InputError("input length " + std::to_string(input.size()) + " != " +
                     std::to_string(shape.input_size()));
  }
  Matrix x = ConstVecMap(input.data(), static_cast<Eigen::Index>(input.size()));
  Matrix y = forward_batch(params, shape, x);
  return Vector(y.data(), y.data() + y.size());
}

Gradients backward(const ParamSet& params, const MlpShape& shape, std::span<const double> input,
                   std::span<const double> output_grad) {
  shape.validate();
  if (input.size() != static_cast<std::size_t>(shape.input_size())) {
    throw InputError("input length does not match network input");
  }
  if (output_grad.size() != static_cast<std::size_t>(shape.output_size())) {
    throw InputError("output gradient length does not match network output");
  }
  Activations cache;
  Matrix x = ConstVecMap(input.data(), static_cast<Eigen::Index>(input.size()));
  forward_batch(params, shape, x, &cache);
  Matrix og = ConstVecMap(output_grad.data(), static_cast<Eigen::Index>(output_grad.size()));
  Gradients grads;
  grads.params.assign(params.flat.size(), 0.0);
  Matrix gin;
  backward_batch(params, shape, cache, og, grads.params, &gin);
  grads.input.assign(gin.data(), gin.data() + gin.size());
  return grads;
}

void adam_step(ParamSet& params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
  const std::size_t n = params.flat.size();
  if (grads.size() != n || state.m.size() != n || state.v.size() != n) {
    throw InputError("Adam: parameter, gradient and moment lengths differ");
  }
  if (!(config.lr > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 || config.beta2 < 0.0 ||
      config.beta2 >= 1.0) {
    throw ConfigError("Adam: need lr > 0 and 0 <= beta1, beta2 < 1");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params.flat[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

double add_l2(const ParamSet& params, double coeff, std::span<double> grads) {
  if (coeff == 0.0) return 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < params.flat.size(); ++i) {
    sq += params.flat[i] * params.flat[i];
    grads[i] += 2.0 * coeff * params.flat[i];
  }
  return coeff * sq;
}

GaussianHeadOutput GaussianHeadOutput::from_raw(std::span<const double> raw) {
  if (raw.size() % 2 != 0) throw InputError("Gaussian head needs an even-length raw output");
  const std::size_t d = raw.size() / 2;
  GaussianHeadOutput h;
  h.mean.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(d));
  h.log_std.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    h.log_std[i] = std::clamp(raw[d + i], kLogStdMin, kLogStdMax);
  }
  return h;
}

double log1m_tanh_sq(double u) {
  // 1 - tanh(u)^2 = 4 / (e^u + e^-u)^2
  const double a = std::abs(u);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

GaussianSample gaussian_sample(const GaussianHeadOutput& head, std::span<const double> noise,
                               std::span<const double> action_low,
                               std::span<const double> action_high) {
  const std::size_t d = head.mean.size();
  if (head.log_std.size() != d || noise.size() != d || action_low.size() != d ||
      action_high.size() != d) {
    throw InputError("Gaussian head, noise and bounds must share one dimension");
  }
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  GaussianSample s;
  s.action.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double ls = std::clamp(head.log_std[i], kLogStdMin, kLogStdMax);
    const double u = head.mean[i] + std::exp(ls) * noise[i];
    const double half = 0.5 * (action_high[i] - action_low[i]);
    const double center = 0.5 * (action_high[i] + action_low[i]);
    s.action[i] = std::clamp(center + half * std::tanh(u), action_low[i], action_high[i]);
    s.log_prob += -0.5 * noise[i] * noise[i] - ls - kHalfLog2Pi - log1m_tanh_sq(u) -
                  std::log(half);
  }
  return s;
}

double finite_diff_check(const ParamSet& params, const ParamLoss& loss,
                         std::span<const double> analytic, double h) {
  if (!(h > 0.0)) throw InputError("finite difference step must be positive");
  if (analytic.size() != params.flat.size()) {
    throw InputError("analytic gradient length does not match parameter count");
  }
  ParamSet probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.flat.size(); ++i) {
    const double orig = probe.flat[i];
    probe.flat[i] = orig + h;
    const double up = loss(probe);
    probe.flat[i] = orig - h;
    const double down = loss(probe);
    probe.flat[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace r2::net
