#pragma once

// Independent reference implementations used as test oracles. They are
// written for clarity (per-neuron loops, scalar formulas) and share no code
// with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "r2/net.hpp"
#include "r2/transitions.hpp"

namespace oracle {

inline double weight(const r2::net::ParamSet& p, std::size_t layer, int row, int col) {
  const auto& v = p.views[layer];
  return p.flat[v.offset + static_cast<std::size_t>(col) * v.rows + row];
}

inline double bias(const r2::net::ParamSet& p, std::size_t layer, int row) {
  const auto& v = p.views[layer];
  return p.flat[v.bias_offset() + row];
}

inline std::vector<double> mlp(const r2::net::ParamSet& p, const r2::net::MlpShape& shape,
                               std::vector<double> x) {
  const std::size_t L = shape.layer_sizes.size() - 1;
  for (std::size_t l = 0; l < L; ++l) {
    const int out = shape.layer_sizes[l + 1];
    const int in = shape.layer_sizes[l];
    std::vector<double> y(out);
    for (int r = 0; r < out; ++r) {
      double s = bias(p, l, r);
      for (int c = 0; c < in; ++c) s += weight(p, l, r, c) * x[c];
      if (l + 1 < L) {
        s = s > 0.0 ? s : 0.0;
      } else if (shape.output == r2::net::OutputActivation::Tanh) {
        s = std::tanh(s);
      }
      y[r] = s;
    }
    x = std::move(y);
  }
  return x;
}

// Smallest |pre-activation| over all hidden ReLU units for input x.
inline double relu_margin(const r2::net::ParamSet& p, const r2::net::MlpShape& shape,
                          std::vector<double> x) {
  double m = std::numeric_limits<double>::infinity();
  const std::size_t L = shape.layer_sizes.size() - 1;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const int out = shape.layer_sizes[l + 1];
    const int in = shape.layer_sizes[l];
    std::vector<double> y(out);
    for (int r = 0; r < out; ++r) {
      double s = bias(p, l, r);
      for (int c = 0; c < in; ++c) s += weight(p, l, r, c) * x[c];
      m = std::min(m, std::abs(s));
      y[r] = s > 0.0 ? s : 0.0;
    }
    x = std::move(y);
  }
  return m;
}

struct SquashedSample {
  std::vector<double> normalized;  // tanh(u)
  double log_prob = 0.0;           // density of center + half * tanh(u)
};

// Direct change-of-variables formula for a diagonal Gaussian pushed through
// a -> center + half * tanh(a).
inline SquashedSample squashed(const std::vector<double>& mean, std::vector<double> log_std,
                               const std::vector<double>& noise, const std::vector<double>& half) {
  SquashedSample s;
  const double pi = 3.14159265358979323846;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    log_std[k] = std::clamp(log_std[k], -20.0, 2.0);
    const double sigma = std::exp(log_std[k]);
    const double u = mean[k] + sigma * noise[k];
    const double t = std::tanh(u);
    s.normalized.push_back(t);
    const double z = (u - mean[k]) / sigma;
    s.log_prob += -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * pi);
    s.log_prob -= std::log(half[k] * (1.0 - t * t));
  }
  return s;
}

// Assigns b to the last min(N-1, L-1) non-final transitions of a successful
// episode, counting backwards from the final transition.
inline r2::Episode relabel(r2::Episode ep, double b, int N) {
  if (!ep.success) return ep;
  const long L = static_cast<long>(ep.transitions.size());
  long assigned = 0;
  for (long i = L - 2; i >= 0 && assigned < N - 1; --i, ++assigned) {
    ep.transitions[static_cast<std::size_t>(i)].reward = b;
    ep.transitions[static_cast<std::size_t>(i)].origin = r2::Origin::Relabeled;
  }
  return ep;
}

// Random episode: rewards 0 except a final 100 on success.
inline r2::Episode random_episode(std::mt19937_64& rng, int length, bool success, int obs_dim = 4,
                                  int act_dim = 2) {
  std::normal_distribution<double> g(0.0, 1.0);
  r2::Episode ep;
  ep.success = success;
  ep.timed_out = !success;
  for (int i = 0; i < length; ++i) {
    r2::Transition t;
    for (int k = 0; k < obs_dim; ++k) t.state.push_back(g(rng));
    for (int k = 0; k < act_dim; ++k) t.action.push_back(g(rng));
    for (int k = 0; k < obs_dim; ++k) t.next_state.push_back(g(rng));
    const bool last = i + 1 == length;
    t.done = last && success;
    t.reward = t.done ? 100.0 : 0.0;
    t.origin = r2::Origin::Agent;
    t.episode_id = 7;
    t.step_index = i;
    ep.transitions.push_back(std::move(t));
  }
  return ep;
}

}  // namespace oracle
