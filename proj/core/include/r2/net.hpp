#pragma once

// Small dense feed-forward network kernel: MLP layout, forward and reverse
// passes (single sample and column-batched), Adam, a tanh-squashed Gaussian
// policy head and a central-difference gradient checker.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace r2::net {

using Vector = std::vector<double>;
// Column-major batch; one sample per column.
using Matrix = Eigen::MatrixXd;

enum class OutputActivation { Identity, Tanh, GaussianHead };

struct MlpShape {
  std::vector<int> layer_sizes;  // input, hidden..., output
  OutputActivation output = OutputActivation::Identity;

  // Throws ConfigError unless there are >= 2 sizes, all >= 1.
  void validate() const;
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  bool operator==(const MlpShape&) const = default;
};

// One affine layer inside ParamSet::flat: a rows x cols weight block stored
// column-major at `offset`, followed by `rows` biases.
struct LayerView {
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t weight_count() const { return static_cast<std::size_t>(rows) * cols; }
  std::size_t bias_offset() const { return offset + weight_count(); }
  std::size_t size() const { return weight_count() + rows; }

  bool operator==(const LayerView&) const = default;
};

struct ParamSet {
  Vector flat;
  std::vector<LayerView> views;

  std::size_t size() const { return flat.size(); }
  bool operator==(const ParamSet&) const = default;
};

struct AdamState {
  Vector m;
  Vector v;
  std::uint64_t t = 0;

  static AdamState zeros(std::size_t n) { return {Vector(n, 0.0), Vector(n, 0.0), 0}; }
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

std::vector<LayerView> layout(const MlpShape& shape);
std::size_t param_count(const MlpShape& shape);

// Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ParamSet init_mlp(const MlpShape& shape, std::uint64_t seed);

Vector forward(const ParamSet& params, const MlpShape& shape, std::span<const double> input);

struct Gradients {
  Vector params;
  Vector input;
};

// Reverse-mode gradient of <forward(input), output_grad>.
Gradients backward(const ParamSet& params, const MlpShape& shape, std::span<const double> input,
                   std::span<const double> output_grad);

// Per-layer post-activation values kept for the reverse pass. layers[0] is
// the input batch, layers.back() the network output.
struct Activations {
  std::vector<Matrix> layers;
};

Matrix forward_batch(const ParamSet& params, const MlpShape& shape, const Matrix& input,
                     Activations* cache = nullptr);

// Accumulates (+=) parameter gradients into `param_grads` (skipped when the
// span is empty). Writes the input gradient when `input_grad` is non-null.
void backward_batch(const ParamSet& params, const MlpShape& shape, const Activations& cache,
                    const Matrix& output_grad, std::span<double> param_grads,
                    Matrix* input_grad = nullptr);

// Bias-corrected Adam, in place. Increments state.t.
void adam_step(ParamSet& params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

// Adds coeff * ||params||^2 to the returned loss and its gradient to `grads`.
double add_l2(const ParamSet& params, double coeff, std::span<double> grads);

// ---- Gaussian policy head ------------------------------------------------

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

struct GaussianHeadOutput {
  Vector mean;
  Vector log_std;  // clamped to [kLogStdMin, kLogStdMax]

  // Splits a raw 2*d network output into mean and clamped log-std.
  static GaussianHeadOutput from_raw(std::span<const double> raw);
};

struct GaussianSample {
  Vector action;
  double log_prob = 0.0;
};

// u = mean + exp(log_std) * noise, action = center + half_range * tanh(u).
// log_prob is the density of the squashed, rescaled action.
GaussianSample gaussian_sample(const GaussianHeadOutput& head, std::span<const double> noise,
                               std::span<const double> action_low,
                               std::span<const double> action_high);

// log(1 - tanh(u)^2), stable for large |u|.
double log1m_tanh_sq(double u);

// ---- Gradient checking ---------------------------------------------------

using ParamLoss = std::function<double(const ParamSet&)>;

// Compares `analytic` to central differences of `loss` around `params`.
// Returns max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-12).
double finite_diff_check(const ParamSet& params, const ParamLoss& loss,
                         std::span<const double> analytic, double h);

// ---- Checkpoints -----------------------------------------------------------

// Layout: u64 layer count, u64 per layer size, u8 output activation,
// u64 parameter count, then the parameters as little-endian f64.
void write_checkpoint(std::ostream& out, const MlpShape& shape, const ParamSet& params);
void read_checkpoint(std::istream& in, MlpShape& shape, ParamSet& params);

}  // namespace r2::net
