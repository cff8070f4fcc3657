#pragma once

// Off-policy actor-critic learners (SAC with twin critics, DDPG) with the
// auxiliary n-step and behaviour-cloning losses, L2 regularization and
// Polyak-averaged target networks.
//
// Networks see actions normalized to [-1, 1]; the environment-unit action
// is center + half_range * normalized.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "r2/net.hpp"
#include "r2/replay.hpp"
#include "r2/transitions.hpp"

namespace r2 {

enum class Algo { SAC, DDPG };

struct AgentConfig {
  Algo algo = Algo::SAC;
  double gamma = 0.9;
  double alpha = 0.2;  // entropy temperature, fixed
  double tau = 0.005;
  double lr_actor = 3e-4;
  double lr_critic = 3e-4;
  int batch_size = 64;
  int replay_ratio = 32;
  double b = 7.0;
  int N = 0;  // relabel window; 0 = rounded mean demo length
  double R = 100.0;
  double lambda_bc = 1.0;
  int bc_batch_size = 32;
  double lambda_n = 1.0;
  int n = 5;
  double l2_actor = 1e-4;
  double l2_critic = 1e-4;
  double per_alpha = 0.6;
  double per_beta = 0.4;
  double per_beta_final = 1.0;
  double per_epsilon = 1e-3;
  double demo_boost = 0.1;
  double bc_reset_fraction = 0.25;
  double sigma_explore = 0.1;  // DDPG, in normalized action units
  std::vector<int> hidden{64, 64};
  bool use_r2 = false;
  bool relabel_online = true;  // only meaningful with use_r2
  bool use_nstep = false;
  bool use_bc = false;
  bool use_demo_boost = false;
  bool use_demo_resets = false;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

const char* to_string(Algo algo);
Algo algo_from_string(const std::string& name);

// Column-per-sample view of a batch of transitions or n-step slices.
struct TransitionBatch {
  net::Matrix states;       // obs_dim x B
  net::Matrix actions;      // act_dim x B, environment units
  net::Matrix next_states;  // obs_dim x B (bootstrap states for slices)
  Eigen::VectorXd rewards;
  Eigen::VectorXd dones;      // 1.0 where the bootstrap is masked
  Eigen::VectorXd discounts;  // gamma for 1-step, gamma^n_used for slices
  std::vector<Origin> origins;

  std::size_t size() const { return static_cast<std::size_t>(states.cols()); }

  static TransitionBatch from_transitions(std::span<const Transition* const> items, double gamma);
  static TransitionBatch from_slices(std::span<const NStepSlice* const> items,
                                     std::span<const Origin> origins = {});
  static TransitionBatch from_replay(const ReplayBuffer& buffer,
                                     std::span<const std::size_t> indices, double gamma,
                                     bool nstep);
};

struct CriticUpdateResult {
  Eigen::VectorXd td_errors;  // Q1(s, a) - y, before the step
  double loss = 0.0;
};

enum class ActMode { Explore, Exploit };

// Standard-normal matrix, deterministic given the seed.
net::Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

struct NamedParams {
  std::string name;
  net::MlpShape shape;
  net::ParamSet* params;
};

class Learner {
 public:
  Learner(int obs_dim, Vector action_low, Vector action_high, AgentConfig config);
  virtual ~Learner() = default;

  const AgentConfig& config() const { return config_; }
  AgentConfig& mutable_config() { return config_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

  virtual Eigen::VectorXd targets(const TransitionBatch& batch, std::uint64_t seed) const = 0;

  // One Adam step on the critic(s) against fixed targets y.
  virtual CriticUpdateResult critic_update(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                           std::span<const double> weights, double l2_critic) = 0;

  // Targets from the slices' own discounts, then the critic machinery with
  // the whole loss scaled by lambda_n.
  CriticUpdateResult nstep_critic_update(const TransitionBatch& slices,
                                         std::span<const double> weights, double l2_critic,
                                         std::uint64_t seed);

  virtual double actor_update(const net::Matrix& states, double l2_actor, std::uint64_t seed) = 0;

  // Throws InputError if any sample is not a demonstration.
  virtual double bc_update(const TransitionBatch& demo_batch, double lambda_bc) = 0;

  virtual void soft_update_targets(double tau) = 0;

  virtual Vector act(std::span<const double> observation, ActMode mode, std::uint64_t seed) const = 0;

  // All parameter sets, online and target, in a stable order.
  virtual std::vector<NamedParams> parameter_sets() = 0;

  Vector normalize_action(std::span<const double> action) const;
  Vector denormalize_action(std::span<const double> normalized) const;
  const Vector& action_low() const { return low_; }
  const Vector& action_high() const { return high_; }

 protected:
  virtual CriticUpdateResult scaled_critic_update(const TransitionBatch& batch,
                                                  const Eigen::VectorXd& y,
                                                  std::span<const double> weights,
                                                  double l2_critic, double scale) = 0;

  // [states; normalized actions]
  net::Matrix critic_input(const net::Matrix& states, const net::Matrix& norm_actions) const;
  net::Matrix normalized(const net::Matrix& actions) const;

  int obs_dim_;
  int act_dim_;
  Vector low_;
  Vector high_;
  Eigen::VectorXd center_;
  Eigen::VectorXd half_;
  AgentConfig config_;
};

// Loss value and flat gradients of a critic objective (no step taken).
struct CriticLossGrad {
  double loss = 0.0;
  std::vector<net::Vector> grads;  // one per online critic
  Eigen::VectorXd td_errors;
};

struct ActorLossGrad {
  double loss = 0.0;
  net::Vector grad;
};

class SacLearner : public Learner {
 public:
  SacLearner(int obs_dim, Vector action_low, Vector action_high, AgentConfig config,
             std::uint64_t seed);

  // y = r + discount * (1 - done) * (min_j Q'_j(s', a') - alpha * log pi(a'|s')),
  // a' ~ pi(.|s') with noise drawn from `seed`.
  Eigen::VectorXd sac_targets(const TransitionBatch& batch, const net::Matrix& noise) const;
  Eigen::VectorXd targets(const TransitionBatch& batch, std::uint64_t seed) const override;

  CriticLossGrad critic_loss_grad(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                  std::span<const double> weights, double l2_critic) const;
  CriticUpdateResult critic_update(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                   std::span<const double> weights, double l2_critic) override;

  ActorLossGrad actor_loss_grad(const net::Matrix& states, const net::Matrix& noise,
                                double l2_actor) const;
  double actor_update(const net::Matrix& states, double l2_actor, std::uint64_t seed) override;

  ActorLossGrad bc_loss_grad(const TransitionBatch& demo_batch, double lambda_bc) const;
  double bc_update(const TransitionBatch& demo_batch, double lambda_bc) override;

  void soft_update_targets(double tau) override;
  Vector act(std::span<const double> observation, ActMode mode, std::uint64_t seed) const override;
  std::vector<NamedParams> parameter_sets() override;

  // Policy head at a single observation.
  net::GaussianHeadOutput policy_head(std::span<const double> observation) const;

  const net::MlpShape& actor_shape() const { return actor_shape_; }
  const net::MlpShape& critic_shape() const { return critic_shape_; }
  net::ParamSet actor;
  std::array<net::ParamSet, 2> critics;
  std::array<net::ParamSet, 2> target_critics;

 protected:
  CriticUpdateResult scaled_critic_update(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                          std::span<const double> weights, double l2_critic,
                                          double scale) override;

 private:
  net::MlpShape actor_shape_;
  net::MlpShape critic_shape_;
  net::AdamState actor_opt_;
  std::array<net::AdamState, 2> critic_opt_;
};

class DdpgLearner : public Learner {
 public:
  DdpgLearner(int obs_dim, Vector action_low, Vector action_high, AgentConfig config,
              std::uint64_t seed);

  // y = r + discount * (1 - done) * Q'(s', mu'(s')).
  Eigen::VectorXd ddpg_targets(const TransitionBatch& batch) const;
  Eigen::VectorXd targets(const TransitionBatch& batch, std::uint64_t seed) const override;

  CriticLossGrad critic_loss_grad(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                  std::span<const double> weights, double l2_critic) const;
  CriticUpdateResult critic_update(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                   std::span<const double> weights, double l2_critic) override;

  ActorLossGrad actor_loss_grad(const net::Matrix& states, double l2_actor) const;
  double actor_update(const net::Matrix& states, double l2_actor, std::uint64_t seed) override;

  ActorLossGrad bc_loss_grad(const TransitionBatch& demo_batch, double lambda_bc) const;
  double bc_update(const TransitionBatch& demo_batch, double lambda_bc) override;

  void soft_update_targets(double tau) override;
  Vector act(std::span<const double> observation, ActMode mode, std::uint64_t seed) const override;
  std::vector<NamedParams> parameter_sets() override;

  const net::MlpShape& actor_shape() const { return actor_shape_; }
  const net::MlpShape& critic_shape() const { return critic_shape_; }
  net::ParamSet actor;
  net::ParamSet critic;
  net::ParamSet target_actor;
  net::ParamSet target_critic;

 protected:
  CriticUpdateResult scaled_critic_update(const TransitionBatch& batch, const Eigen::VectorXd& y,
                                          std::span<const double> weights, double l2_critic,
                                          double scale) override;

 private:
  net::MlpShape actor_shape_;
  net::MlpShape critic_shape_;
  net::AdamState actor_opt_;
  net::AdamState critic_opt_;
};

std::unique_ptr<Learner> make_learner(int obs_dim, const Vector& action_low,
                                      const Vector& action_high, const AgentConfig& config,
                                      std::uint64_t seed);

}  // namespace r2
