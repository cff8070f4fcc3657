#include "r2/agents.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "r2/error.hpp"
#include "r2/seed.hpp"

namespace r2 {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void soft_update(net::ParamSet& target, const net::ParamSet& online, double tau) {
  for (std::size_t i = 0; i < target.flat.size(); ++i) {
    target.flat[i] = tau * online.flat[i] + (1.0 - tau) * target.flat[i];
  }
}

void check_weights(std::size_t batch, const Eigen::VectorXd& y, std::span<const double> weights) {
  if (static_cast<std::size_t>(y.size()) != batch || weights.size() != batch) {
    throw InputError("targets and importance weights must match the batch size");
  }
}

void check_demo_only(const TransitionBatch& batch) {
  if (batch.origins.size() != batch.size()) {
    throw InputError("behaviour cloning needs origin tags for every sample");
  }
  for (Origin o : batch.origins) {
    if (o != Origin::Demo) throw InputError("behaviour cloning batch contains non-demo transitions");
  }
}

net::AdamConfig adam(double lr) {
  net::AdamConfig c;
  c.lr = lr;
  return c;
}

net::MlpShape make_shape(int in, const std::vector<int>& hidden, int out, net::OutputActivation act) {
  net::MlpShape s;
  s.layer_sizes.push_back(in);
  s.layer_sizes.insert(s.layer_sizes.end(), hidden.begin(), hidden.end());
  s.layer_sizes.push_back(out);
  s.output = act;
  s.validate();
  return s;
}

double sum_log_half(const Eigen::VectorXd& half) { return half.array().log().sum(); }

}  // namespace

void AgentConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
  require(lr_actor > 0.0 && lr_critic > 0.0, "learning rates must be > 0");
  require(batch_size > 0 && bc_batch_size > 0, "batch sizes must be > 0");
  require(replay_ratio > 0, "replay_ratio must be > 0");
  require(N >= 0, "N must be >= 0");
  require(R > 0.0, "R must be > 0");
  require(lambda_bc >= 0.0 && lambda_n >= 0.0, "auxiliary loss weights must be >= 0");
  require(n >= 1, "n must be >= 1");
  require(l2_actor >= 0.0 && l2_critic >= 0.0, "L2 coefficients must be >= 0");
  require(per_alpha >= 0.0 && per_alpha <= 1.0, "per_alpha must lie in [0, 1]");
  require(per_beta >= 0.0 && per_beta <= 1.0 && per_beta_final >= 0.0 && per_beta_final <= 1.0,
          "per_beta must lie in [0, 1]");
  require(per_epsilon > 0.0, "per_epsilon must be > 0");
  require(demo_boost >= 0.0, "demo_boost must be >= 0");
  require(bc_reset_fraction >= 0.0 && bc_reset_fraction <= 1.0,
          "bc_reset_fraction must lie in [0, 1]");
  require(sigma_explore >= 0.0, "sigma_explore must be >= 0");
  require(!hidden.empty(), "at least one hidden layer is required");
  for (int h : hidden) require(h >= 1, "hidden sizes must be >= 1");
}

const char* to_string(Algo algo) { return algo == Algo::SAC ? "sac" : "ddpg"; }

Algo algo_from_string(const std::string& name) {
  if (name == "sac" || name == "SAC") return Algo::SAC;
  if (name == "ddpg" || name == "DDPG") return Algo::DDPG;
  throw ConfigError("unknown algorithm '" + name + "'");
}

// ---- batches ---------------------------------------------------------------

TransitionBatch TransitionBatch::from_transitions(std::span<const Transition* const> items,
                                                  double gamma) {
  if (items.empty()) throw InputError("empty batch");
  const auto B = static_cast<Eigen::Index>(items.size());
  const auto od = static_cast<Eigen::Index>(items[0]->state.size());
  const auto ad = static_cast<Eigen::Index>(items[0]->action.size());
  TransitionBatch b;
  b.states.resize(od, B);
  b.next_states.resize(od, B);
  b.actions.resize(ad, B);
  b.rewards.resize(B);
  b.dones.resize(B);
  b.discounts.setConstant(B, gamma);
  b.origins.reserve(items.size());
  for (Eigen::Index i = 0; i < B; ++i) {
    const Transition& t = *items[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(t.state.size()) != od ||
        static_cast<Eigen::Index>(t.next_state.size()) != od ||
        static_cast<Eigen::Index>(t.action.size()) != ad) {
      throw InputError("inconsistent transition dimensions in batch");
    }
    b.states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), od);
    b.next_states.col(i) = Eigen::Map<const Eigen::VectorXd>(t.next_state.data(), od);
    b.actions.col(i) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), ad);
    b.rewards(i) = t.reward;
    b.dones(i) = t.done ? 1.0 : 0.0;
    b.origins.push_back(t.origin);
  }
  return b;
}

TransitionBatch TransitionBatch::from_slices(std::span<const NStepSlice* const> items,
                                             std::span<const Origin> origins) {
  if (items.empty()) throw InputError("empty batch");
  const auto B = static_cast<Eigen::Index>(items.size());
  const auto od = static_cast<Eigen::Index>(items[0]->state.size());
  const auto ad = static_cast<Eigen::Index>(items[0]->action.size());
  TransitionBatch b;
  b.states.resize(od, B);
  b.next_states.resize(od, B);
  b.actions.resize(ad, B);
  b.rewards.resize(B);
  b.dones.resize(B);
  b.discounts.resize(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const NStepSlice& s = *items[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(s.state.size()) != od ||
        static_cast<Eigen::Index>(s.boot_state.size()) != od ||
        static_cast<Eigen::Index>(s.action.size()) != ad) {
      throw InputError("inconsistent slice dimensions in batch");
    }
    b.states.col(i) = Eigen::Map<const Eigen::VectorXd>(s.state.data(), od);
    b.next_states.col(i) = Eigen::Map<const Eigen::VectorXd>(s.boot_state.data(), od);
    b.actions.col(i) = Eigen::Map<const Eigen::VectorXd>(s.action.data(), ad);
    b.rewards(i) = s.cum_reward;
    b.dones(i) = s.boot_done ? 1.0 : 0.0;
    b.discounts(i) = s.discount;
  }
  b.origins.assign(origins.begin(), origins.end());
  return b;
}

TransitionBatch TransitionBatch::from_replay(const ReplayBuffer& buffer,
                                             std::span<const std::size_t> indices, double gamma,
                                             bool nstep) {
  std::vector<Origin> origins;
  origins.reserve(indices.size());
  for (auto i : indices) origins.push_back(buffer.item(i).transition.origin);
  if (nstep) {
    std::vector<const NStepSlice*> ptrs;
    ptrs.reserve(indices.size());
    for (auto i : indices) ptrs.push_back(&buffer.item(i).nstep);
    return from_slices(ptrs, origins);
  }
  std::vector<const Transition*> ptrs;
  ptrs.reserve(indices.size());
  for (auto i : indices) ptrs.push_back(&buffer.item(i).transition);
  return from_transitions(ptrs, gamma);
}

net::Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  net::Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  }
  return m;
}

// ---- Learner base ------------------------------------------------------------

Learner::Learner(int obs_dim, Vector action_low, Vector action_high, AgentConfig config)
    : obs_dim_(obs_dim),
      act_dim_(static_cast<int>(action_low.size())),
      low_(std::move(action_low)),
      high_(std::move(action_high)),
      config_(std::move(config)) {
  config_.validate();
  if (obs_dim_ < 1 || act_dim_ < 1 || high_.size() != low_.size()) {
    throw ConfigError("learner needs obs_dim >= 1 and matching action bounds");
  }
  center_.resize(act_dim_);
  half_.resize(act_dim_);
  for (int i = 0; i < act_dim_; ++i) {
    if (!(high_[i] > low_[i])) throw ConfigError("action_high must exceed action_low");
    center_(i) = 0.5 * (high_[i] + low_[i]);
    half_(i) = 0.5 * (high_[i] - low_[i]);
  }
}

Vector Learner::normalize_action(std::span<const double> action) const {
  Vector out(action.size());
  for (std::size_t i = 0; i < action.size(); ++i) {
    out[i] = (action[i] - center_(static_cast<Eigen::Index>(i))) / half_(static_cast<Eigen::Index>(i));
  }
  return out;
}

Vector Learner::denormalize_action(std::span<const double> normalized) const {
  Vector out(normalized.size());
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out[i] = std::clamp(center_(k) + half_(k) * normalized[i], low_[i], high_[i]);
  }
  return out;
}

net::Matrix Learner::normalized(const net::Matrix& actions) const {
  return ((actions.colwise() - center_).array().colwise() / half_.array()).matrix();
}

net::Matrix Learner::critic_input(const net::Matrix& states, const net::Matrix& norm_actions) const {
  net::Matrix x(states.rows() + norm_actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(norm_actions.rows()) = norm_actions;
  return x;
}

CriticUpdateResult Learner::nstep_critic_update(const TransitionBatch& slices,
                                                std::span<const double> weights, double l2_critic,
                                                std::uint64_t seed) {
  const Eigen::VectorXd y = targets(slices, seed);
  return scaled_critic_update(slices, y, weights, l2_critic, config_.lambda_n);
}

// ---- SAC ---------------------------------------------------------------------

SacLearner::SacLearner(int obs_dim, Vector action_low, Vector action_high, AgentConfig config,
                       std::uint64_t seed)
    : Learner(obs_dim, std::move(action_low), std::move(action_high), std::move(config)) {
  actor_shape_ = make_shape(obs_dim_, config_.hidden, 2 * act_dim_, net::OutputActivation::GaussianHead);
  critic_shape_ = make_shape(obs_dim_ + act_dim_, config_.hidden, 1, net::OutputActivation::Identity);
  actor = net::init_mlp(actor_shape_, mix_seed(seed, 0));
  for (int j = 0; j < 2; ++j) {
    critics[j] = net::init_mlp(critic_shape_, mix_seed(seed, 1 + j));
    target_critics[j] = critics[j];
    critic_opt_[j] = net::AdamState::zeros(critics[j].size());
  }
  actor_opt_ = net::AdamState::zeros(actor.size());
}

Eigen::VectorXd SacLearner::sac_targets(const TransitionBatch& batch, const net::Matrix& noise) const {
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index d = act_dim_;
  if (noise.rows() != d || noise.cols() != B) throw InputError("noise shape mismatch");
  const net::Matrix raw = net::forward_batch(actor, actor_shape_, batch.next_states);
  const net::Matrix mu = raw.topRows(d);
  const net::Matrix ls = raw.bottomRows(d).cwiseMax(net::kLogStdMin).cwiseMin(net::kLogStdMax);
  const net::Matrix u = mu.array() + ls.array().exp() * noise.array();
  const net::Matrix a = u.array().tanh();
  const double log_half = sum_log_half(half_);
  Eigen::VectorXd logp(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    double lp = -log_half;
    for (Eigen::Index k = 0; k < d; ++k) {
      lp += -0.5 * noise(k, i) * noise(k, i) - ls(k, i) - kHalfLog2Pi - net::log1m_tanh_sq(u(k, i));
    }
    logp(i) = lp;
  }
  const net::Matrix x = critic_input(batch.next_states, a);
  const net::Matrix q1 = net::forward_batch(target_critics[0], critic_shape_, x);
  const net::Matrix q2 = net::forward_batch(target_critics[1], critic_shape_, x);
  Eigen::VectorXd y(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const double soft_v = std::min(q1(0, i), q2(0, i)) - config_.alpha * logp(i);
    y(i) = batch.rewards(i) + batch.discounts(i) * (1.0 - batch.dones(i)) * soft_v;
  }
  return y;
}

Eigen::VectorXd SacLearner::targets(const TransitionBatch& batch, std::uint64_t seed) const {
  return sac_targets(batch, standard_normal(act_dim_, static_cast<Eigen::Index>(batch.size()), seed));
}

CriticLossGrad SacLearner::critic_loss_grad(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                            std::span<const double> weights,
                                            double l2_critic) const {
  const std::size_t B = batch.size();
  check_weights(B, y, weights);
  const double inv_b = 1.0 / static_cast<double>(B);
  const net::Matrix x = critic_input(batch.states, normalized(batch.actions));
  CriticLossGrad out;
  for (int j = 0; j < 2; ++j) {
    net::Activations cache;
    const net::Matrix q = net::forward_batch(critics[j], critic_shape_, x, &cache);
    net::Matrix og(1, static_cast<Eigen::Index>(B));
    for (std::size_t i = 0; i < B; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double diff = q(0, k) - y(k);
      out.loss += weights[i] * diff * diff * inv_b;
      og(0, k) = 2.0 * weights[i] * diff * inv_b;
    }
    if (j == 0) out.td_errors = q.row(0).transpose() - y;
    net::Vector g(critics[j].size(), 0.0);
    net::backward_batch(critics[j], critic_shape_, cache, og, g);
    out.loss += net::add_l2(critics[j], l2_critic, g);
    out.grads.push_back(std::move(g));
  }
  return out;
}

CriticUpdateResult SacLearner::scaled_critic_update(const TransitionBatch& batch,
                                                    const Eigen::VectorXd& y,
                                                    std::span<const double> weights,
                                                    double l2_critic, double scale) {
  CriticLossGrad lg = critic_loss_grad(batch, y, weights, l2_critic);
  if (scale != 1.0) {
    lg.loss *= scale;
    for (auto& g : lg.grads) {
      for (double& v : g) v *= scale;
    }
  }
  for (int j = 0; j < 2; ++j) {
    net::adam_step(critics[j], lg.grads[j], critic_opt_[j], adam(config_.lr_critic));
  }
  return {std::move(lg.td_errors), lg.loss};
}

CriticUpdateResult SacLearner::critic_update(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                             std::span<const double> weights, double l2_critic) {
  return scaled_critic_update(batch, y, weights, l2_critic, 1.0);
}

ActorLossGrad SacLearner::actor_loss_grad(const net::Matrix& states, const net::Matrix& noise,
                                          double l2_actor) const {
  const Eigen::Index B = states.cols();
  const Eigen::Index d = act_dim_;
  if (noise.rows() != d || noise.cols() != B) throw InputError("noise shape mismatch");
  const double inv_b = 1.0 / static_cast<double>(B);
  const double alpha = config_.alpha;

  net::Activations actor_cache;
  const net::Matrix raw = net::forward_batch(actor, actor_shape_, states, &actor_cache);
  const net::Matrix mu = raw.topRows(d);
  const net::Matrix raw_ls = raw.bottomRows(d);
  const net::Matrix ls = raw_ls.cwiseMax(net::kLogStdMin).cwiseMin(net::kLogStdMax);
  const net::Matrix sigma = ls.array().exp();
  const net::Matrix u = mu.array() + sigma.array() * noise.array();
  const net::Matrix a = u.array().tanh();

  const double log_half = sum_log_half(half_);
  const net::Matrix x = critic_input(states, a);
  net::Activations c1, c2;
  const net::Matrix q1 = net::forward_batch(critics[0], critic_shape_, x, &c1);
  const net::Matrix q2 = net::forward_batch(critics[1], critic_shape_, x, &c2);

  ActorLossGrad out;
  net::Matrix og1 = net::Matrix::Zero(1, B);
  net::Matrix og2 = net::Matrix::Zero(1, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    double lp = -log_half;
    for (Eigen::Index k = 0; k < d; ++k) {
      lp += -0.5 * noise(k, i) * noise(k, i) - ls(k, i) - kHalfLog2Pi - net::log1m_tanh_sq(u(k, i));
    }
    const bool first = q1(0, i) <= q2(0, i);
    const double qmin = first ? q1(0, i) : q2(0, i);
    out.loss += (alpha * lp - qmin) * inv_b;
    (first ? og1 : og2)(0, i) = -inv_b;
  }

  net::Matrix gin1, gin2;
  net::backward_batch(critics[0], critic_shape_, c1, og1, {}, &gin1);
  net::backward_batch(critics[1], critic_shape_, c2, og2, {}, &gin2);
  const net::Matrix g_a = gin1.bottomRows(d) + gin2.bottomRows(d);

  net::Matrix head_grad(2 * d, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const double ak = a(k, i);
      // d logp / du = 2 tanh(u); d logp / d log_std = -1 (+ path through u)
      const double g_u = g_a(k, i) * (1.0 - ak * ak) + 2.0 * alpha * inv_b * ak;
      head_grad(k, i) = g_u;
      const bool clamped = raw_ls(k, i) < net::kLogStdMin || raw_ls(k, i) > net::kLogStdMax;
      head_grad(d + k, i) = clamped ? 0.0 : g_u * sigma(k, i) * noise(k, i) - alpha * inv_b;
    }
  }
  out.grad.assign(actor.size(), 0.0);
  net::backward_batch(actor, actor_shape_, actor_cache, head_grad, out.grad);
  out.loss += net::add_l2(actor, l2_actor, out.grad);
  return out;
}

double SacLearner::actor_update(const net::Matrix& states, double l2_actor, std::uint64_t seed) {
  const net::Matrix noise = standard_normal(act_dim_, states.cols(), seed);
  ActorLossGrad lg = actor_loss_grad(states, noise, l2_actor);
  net::adam_step(actor, lg.grad, actor_opt_, adam(config_.lr_actor));
  return lg.loss;
}

ActorLossGrad SacLearner::bc_loss_grad(const TransitionBatch& demo_batch, double lambda_bc) const {
  check_demo_only(demo_batch);
  const Eigen::Index B = static_cast<Eigen::Index>(demo_batch.size());
  const Eigen::Index d = act_dim_;
  const double inv_b = 1.0 / static_cast<double>(B);
  net::Activations cache;
  const net::Matrix raw = net::forward_batch(actor, actor_shape_, demo_batch.states, &cache);
  const net::Matrix mean_action = raw.topRows(d).array().tanh();
  const net::Matrix target = normalized(demo_batch.actions);
  const net::Matrix diff = mean_action - target;
  ActorLossGrad out;
  out.loss = lambda_bc * diff.squaredNorm() * inv_b;
  net::Matrix head_grad = net::Matrix::Zero(2 * d, B);
  head_grad.topRows(d) =
      (2.0 * lambda_bc * inv_b) * (diff.array() * (1.0 - mean_action.array().square())).matrix();
  out.grad.assign(actor.size(), 0.0);
  net::backward_batch(actor, actor_shape_, cache, head_grad, out.grad);
  return out;
}

double SacLearner::bc_update(const TransitionBatch& demo_batch, double lambda_bc) {
  ActorLossGrad lg = bc_loss_grad(demo_batch, lambda_bc);
  net::adam_step(actor, lg.grad, actor_opt_, adam(config_.lr_actor));
  return lg.loss;
}

void SacLearner::soft_update_targets(double tau) {
  for (int j = 0; j < 2; ++j) soft_update(target_critics[j], critics[j], tau);
}

net::GaussianHeadOutput SacLearner::policy_head(std::span<const double> observation) const {
  return net::GaussianHeadOutput::from_raw(net::forward(actor, actor_shape_, observation));
}

Vector SacLearner::act(std::span<const double> observation, ActMode mode, std::uint64_t seed) const {
  const auto head = policy_head(observation);
  if (mode == ActMode::Exploit) {
    Vector m(head.mean.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::tanh(head.mean[i]);
    return denormalize_action(m);
  }
  const net::Matrix noise = standard_normal(act_dim_, 1, seed);
  return net::gaussian_sample(head, std::span<const double>(noise.data(), noise.size()), low_, high_)
      .action;
}

std::vector<NamedParams> SacLearner::parameter_sets() {
  return {{"actor", actor_shape_, &actor},
          {"critic1", critic_shape_, &critics[0]},
          {"critic2", critic_shape_, &critics[1]},
          {"target_critic1", critic_shape_, &target_critics[0]},
          {"target_critic2", critic_shape_, &target_critics[1]}};
}

// ---- DDPG ----------------------------------------------------------------------

DdpgLearner::DdpgLearner(int obs_dim, Vector action_low, Vector action_high, AgentConfig config,
                         std::uint64_t seed)
    : Learner(obs_dim, std::move(action_low), std::move(action_high), std::move(config)) {
  actor_shape_ = make_shape(obs_dim_, config_.hidden, act_dim_, net::OutputActivation::Tanh);
  critic_shape_ = make_shape(obs_dim_ + act_dim_, config_.hidden, 1, net::OutputActivation::Identity);
  actor = net::init_mlp(actor_shape_, mix_seed(seed, 0));
  critic = net::init_mlp(critic_shape_, mix_seed(seed, 1));
  target_actor = actor;
  target_critic = critic;
  actor_opt_ = net::AdamState::zeros(actor.size());
  critic_opt_ = net::AdamState::zeros(critic.size());
}

Eigen::VectorXd DdpgLearner::ddpg_targets(const TransitionBatch& batch) const {
  const net::Matrix a = net::forward_batch(target_actor, actor_shape_, batch.next_states);
  const net::Matrix q = net::forward_batch(target_critic, critic_shape_, critic_input(batch.next_states, a));
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  Eigen::VectorXd y(B);
  for (Eigen::Index i = 0; i < B; ++i) {
    y(i) = batch.rewards(i) + batch.discounts(i) * (1.0 - batch.dones(i)) * q(0, i);
  }
  return y;
}

Eigen::VectorXd DdpgLearner::targets(const TransitionBatch& batch, std::uint64_t) const {
  return ddpg_targets(batch);
}

CriticLossGrad DdpgLearner::critic_loss_grad(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                             std::span<const double> weights,
                                             double l2_critic) const {
  const std::size_t B = batch.size();
  check_weights(B, y, weights);
  const double inv_b = 1.0 / static_cast<double>(B);
  net::Activations cache;
  const net::Matrix q =
      net::forward_batch(critic, critic_shape_, critic_input(batch.states, normalized(batch.actions)), &cache);
  CriticLossGrad out;
  net::Matrix og(1, static_cast<Eigen::Index>(B));
  for (std::size_t i = 0; i < B; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double diff = q(0, k) - y(k);
    out.loss += weights[i] * diff * diff * inv_b;
    og(0, k) = 2.0 * weights[i] * diff * inv_b;
  }
  out.td_errors = q.row(0).transpose() - y;
  net::Vector g(critic.size(), 0.0);
  net::backward_batch(critic, critic_shape_, cache, og, g);
  out.loss += net::add_l2(critic, l2_critic, g);
  out.grads.push_back(std::move(g));
  return out;
}

CriticUpdateResult DdpgLearner::scaled_critic_update(const TransitionBatch& batch,
                                                     const Eigen::VectorXd& y,
                                                     std::span<const double> weights,
                                                     double l2_critic, double scale) {
  CriticLossGrad lg = critic_loss_grad(batch, y, weights, l2_critic);
  if (scale != 1.0) {
    lg.loss *= scale;
    for (double& v : lg.grads[0]) v *= scale;
  }
  net::adam_step(critic, lg.grads[0], critic_opt_, adam(config_.lr_critic));
  return {std::move(lg.td_errors), lg.loss};
}

CriticUpdateResult DdpgLearner::critic_update(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                              std::span<const double> weights, double l2_critic) {
  return scaled_critic_update(batch, y, weights, l2_critic, 1.0);
}

ActorLossGrad DdpgLearner::actor_loss_grad(const net::Matrix& states, double l2_actor) const {
  const Eigen::Index B = states.cols();
  const double inv_b = 1.0 / static_cast<double>(B);
  net::Activations actor_cache, critic_cache;
  const net::Matrix a = net::forward_batch(actor, actor_shape_, states, &actor_cache);
  const net::Matrix q = net::forward_batch(critic, critic_shape_, critic_input(states, a), &critic_cache);
  ActorLossGrad out;
  out.loss = -q.sum() * inv_b;
  const net::Matrix og = net::Matrix::Constant(1, B, -inv_b);
  net::Matrix gin;
  net::backward_batch(critic, critic_shape_, critic_cache, og, {}, &gin);
  out.grad.assign(actor.size(), 0.0);
  net::backward_batch(actor, actor_shape_, actor_cache, gin.bottomRows(act_dim_), out.grad);
  out.loss += net::add_l2(actor, l2_actor, out.grad);
  return out;
}

double DdpgLearner::actor_update(const net::Matrix& states, double l2_actor, std::uint64_t) {
  ActorLossGrad lg = actor_loss_grad(states, l2_actor);
  net::adam_step(actor, lg.grad, actor_opt_, adam(config_.lr_actor));
  return lg.loss;
}

ActorLossGrad DdpgLearner::bc_loss_grad(const TransitionBatch& demo_batch, double lambda_bc) const {
  check_demo_only(demo_batch);
  const double inv_b = 1.0 / static_cast<double>(demo_batch.size());
  net::Activations cache;
  const net::Matrix a = net::forward_batch(actor, actor_shape_, demo_batch.states, &cache);
  const net::Matrix diff = a - normalized(demo_batch.actions);
  ActorLossGrad out;
  out.loss = lambda_bc * diff.squaredNorm() * inv_b;
  out.grad.assign(actor.size(), 0.0);
  net::backward_batch(actor, actor_shape_, cache, (2.0 * lambda_bc * inv_b) * diff, out.grad);
  return out;
}

double DdpgLearner::bc_update(const TransitionBatch& demo_batch, double lambda_bc) {
  ActorLossGrad lg = bc_loss_grad(demo_batch, lambda_bc);
  net::adam_step(actor, lg.grad, actor_opt_, adam(config_.lr_actor));
  return lg.loss;
}

void DdpgLearner::soft_update_targets(double tau) {
  soft_update(target_critic, critic, tau);
  soft_update(target_actor, actor, tau);
}

Vector DdpgLearner::act(std::span<const double> observation, ActMode mode, std::uint64_t seed) const {
  Vector a = net::forward(actor, actor_shape_, observation);
  if (mode == ActMode::Explore && config_.sigma_explore > 0.0) {
    const net::Matrix noise = standard_normal(act_dim_, 1, seed);
    for (int i = 0; i < act_dim_; ++i) {
      a[i] = std::clamp(a[i] + config_.sigma_explore * noise(i, 0), -1.0, 1.0);
    }
  }
  return denormalize_action(a);
}

std::vector<NamedParams> DdpgLearner::parameter_sets() {
  return {{"actor", actor_shape_, &actor},
          {"critic", critic_shape_, &critic},
          {"target_actor", actor_shape_, &target_actor},
          {"target_critic", critic_shape_, &target_critic}};
}

std::unique_ptr<Learner> make_learner(int obs_dim, const Vector& action_low,
                                      const Vector& action_high, const AgentConfig& config,
                                      std::uint64_t seed) {
  if (config.algo == Algo::SAC) {
    return std::make_unique<SacLearner>(obs_dim, action_low, action_high, config, seed);
  }
  return std::make_unique<DdpgLearner>(obs_dim, action_low, action_high, config, seed);
}

}  // namespace r2
