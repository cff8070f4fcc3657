#pragma once

// Prioritized replay: a sum tree over p_i^alpha, a ring buffer of transitions
// with demo accounting, the demo-ratio top-up and n-step slice assembly.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "r2/transitions.hpp"

namespace r2 {

// Binary sum tree over a power-of-two number of leaves. nodes_[1] is the
// root, leaf i lives at nodes_[leaf_count + i].
class SumTree {
 public:
  explicit SumTree(std::size_t min_capacity);

  std::size_t leaf_count() const { return leaves_; }
  double total() const { return nodes_[1]; }
  double leaf(std::size_t i) const { return nodes_[leaves_ + i]; }
  void set(std::size_t i, double value);

  // Leaf whose cumulative range contains `prefix` (0 <= prefix < total()).
  std::size_t find(double prefix) const;

  // Node value by heap index (1 = root); exposed for invariant checks.
  double node(std::size_t heap_index) const { return nodes_[heap_index]; }

 private:
  std::size_t leaves_;
  std::vector<double> nodes_;
};

struct NStepSlice {
  Vector state;
  Vector action;
  double cum_reward = 0.0;  // sum_{k < n_used} gamma^k r_k
  Vector boot_state;
  bool boot_done = false;
  int n_used = 1;
  double discount = 1.0;  // gamma^n_used

  bool operator==(const NStepSlice&) const = default;
};

// One slice per transition; windows are clipped at the episode end and use
// the episode's current (possibly relabeled) rewards.
std::vector<NStepSlice> assemble_n_step(const Episode& episode, int n, double gamma);

struct ReplayItem {
  Transition transition;
  NStepSlice nstep;
};

struct PerConfig {
  double alpha = 0.6;
  double beta = 0.4;
  double epsilon = 1e-3;
  double demo_boost = 0.0;  // added to demo priorities (fD-style boost)
};

struct SampledBatch {
  std::vector<std::size_t> indices;
  std::vector<double> weights;        // importance weights, max == 1
  std::vector<double> probabilities;  // P(i) at sampling time
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, PerConfig per);

  // Stores at the current max raw priority (1 when empty), evicting the
  // oldest item once full.
  void push(ReplayItem item);

  // Assembles n-step slices for the whole episode and pushes every step.
  void push_episode(const Episode& episode, int n, double gamma);

  // Stratified proportional sampling; deterministic given the seed. Throws
  // NotReadyError when fewer than batch_size items are stored.
  SampledBatch sample_prioritized(std::size_t batch_size, std::uint64_t seed) const;

  // Uniform sampling with replacement, ignoring priorities (BC demo store).
  std::vector<std::size_t> sample_uniform(std::size_t batch_size, std::uint64_t seed) const;

  // priority_i = |td_i| + epsilon + demo_boost * [origin == Demo].
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors);

  const ReplayItem& item(std::size_t i) const { return items_.at(i); }
  double priority(std::size_t i) const { return priorities_.at(i); }
  double probability(std::size_t i) const;

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t demo_count() const { return demo_count_; }
  std::size_t total_count() const { return items_.size(); }
  double demo_ratio() const;

  const PerConfig& per() const { return per_; }
  void set_beta(double beta) { per_.beta = beta; }
  const SumTree& tree() const { return tree_; }

 private:
  double max_priority() const;
  void set_priority(std::size_t i, double raw);

  std::size_t capacity_;
  PerConfig per_;
  std::vector<ReplayItem> items_;
  std::vector<double> priorities_;  // raw priorities (before ^alpha)
  SumTree tree_;
  std::vector<double> max_nodes_;  // max tree over raw priorities, same layout as tree_
  std::size_t next_ = 0;
  std::size_t demo_count_ = 0;
};

// Supplies fresh successful demonstration episodes on request.
class DemoSource {
 public:
  virtual ~DemoSource() = default;
  // nullopt once exhausted.
  virtual std::optional<Episode> next() = 0;
};

struct TopUpParams {
  double target_ratio = 0.1;
  double R = 100.0;
  double b = 0.0;
  int nstep_n = 1;
  double gamma = 0.99;
};

struct TopUpResult {
  std::size_t added = 0;    // transitions pushed
  std::size_t episodes = 0;
  bool exhausted = false;   // source ran dry before the ratio was met
};

// Ingests whole demo episodes while demo_count / total_count < target_ratio
// (or the buffer is empty).
TopUpResult demo_ratio_top_up(ReplayBuffer& buffer, DemoSource& source, const TopUpParams& params);

}  // namespace r2
