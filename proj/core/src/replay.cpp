#include "r2/replay.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "r2/error.hpp"

namespace r2 {

SumTree::SumTree(std::size_t min_capacity)
    : leaves_(std::bit_ceil(std::max<std::size_t>(min_capacity, 1))), nodes_(2 * leaves_, 0.0) {}

void SumTree::set(std::size_t i, double value) {
  if (i >= leaves_) throw InputError("sum tree leaf index out of range");
  if (!(value >= 0.0)) throw InputError("sum tree values must be non-negative");
  std::size_t node = leaves_ + i;
  nodes_[node] = value;
  for (node /= 2; node >= 1; node /= 2) {
    nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
  }
}

std::size_t SumTree::find(double prefix) const {
  std::size_t node = 1;
  while (node < leaves_) {
    const double left = nodes_[2 * node];
    if (prefix < left) {
      node = 2 * node;
    } else {
      prefix -= left;
      node = 2 * node + 1;
    }
  }
  return node - leaves_;
}

std::vector<NStepSlice> assemble_n_step(const Episode& episode, int n, double gamma) {
  if (n < 1) throw InputError("n-step window must be >= 1");
  const auto& tr = episode.transitions;
  const std::size_t L = tr.size();
  std::vector<NStepSlice> slices;
  slices.reserve(L);
  for (std::size_t t = 0; t < L; ++t) {
    NStepSlice s;
    s.state = tr[t].state;
    s.action = tr[t].action;
    const std::size_t used = std::min<std::size_t>(static_cast<std::size_t>(n), L - t);
    double g = 1.0;
    for (std::size_t k = 0; k < used; ++k) {
      s.cum_reward += g * tr[t + k].reward;
      g *= gamma;
    }
    const auto& last = tr[t + used - 1];
    s.boot_state = last.next_state;
    s.boot_done = last.done;
    s.n_used = static_cast<int>(used);
    s.discount = g;
    slices.push_back(std::move(s));
  }
  return slices;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, PerConfig per)
    : capacity_(capacity), per_(per), tree_(capacity), max_nodes_(2 * tree_.leaf_count(), 0.0) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  if (per.alpha < 0.0 || per.alpha > 1.0 || per.beta < 0.0 || per.beta > 1.0) {
    throw ConfigError("PER alpha and beta must lie in [0, 1]");
  }
  if (!(per.epsilon > 0.0) || per.demo_boost < 0.0) {
    throw ConfigError("PER epsilon must be > 0 and demo boost >= 0");
  }
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

double ReplayBuffer::max_priority() const {
  return items_.empty() ? 1.0 : max_nodes_[1];
}

void ReplayBuffer::set_priority(std::size_t i, double raw) {
  priorities_[i] = raw;
  tree_.set(i, std::pow(raw, per_.alpha));
  std::size_t node = tree_.leaf_count() + i;
  max_nodes_[node] = raw;
  for (node /= 2; node >= 1; node /= 2) {
    max_nodes_[node] = std::max(max_nodes_[2 * node], max_nodes_[2 * node + 1]);
  }
}

void ReplayBuffer::push(ReplayItem item) {
  const double p = max_priority();
  const bool is_demo = item.transition.origin == Origin::Demo;
  std::size_t slot;
  if (items_.size() < capacity_) {
    slot = items_.size();
    items_.push_back(std::move(item));
    priorities_.push_back(0.0);
  } else {
    slot = next_;
    if (items_[slot].transition.origin == Origin::Demo) --demo_count_;
    items_[slot] = std::move(item);
  }
  if (is_demo) ++demo_count_;
  next_ = (slot + 1) % capacity_;
  set_priority(slot, p);
}

void ReplayBuffer::push_episode(const Episode& episode, int n, double gamma) {
  auto slices = assemble_n_step(episode, n, gamma);
  for (std::size_t i = 0; i < slices.size(); ++i) {
    push({episode.transitions[i], std::move(slices[i])});
  }
}

double ReplayBuffer::probability(std::size_t i) const {
  return tree_.leaf(i) / tree_.total();
}

double ReplayBuffer::demo_ratio() const {
  return items_.empty() ? 0.0 : static_cast<double>(demo_count_) / static_cast<double>(items_.size());
}

SampledBatch ReplayBuffer::sample_prioritized(std::size_t batch_size, std::uint64_t seed) const {
  if (batch_size == 0) throw InputError("batch size must be positive");
  if (items_.size() < batch_size) {
    throw NotReadyError("replay buffer holds " + std::to_string(items_.size()) +
                        " items, batch needs " + std::to_string(batch_size));
  }
  std::mt19937_64 rng(seed);
  const double total = tree_.total();
  const double segment = total / static_cast<double>(batch_size);
  const double m = static_cast<double>(items_.size());
  SampledBatch out;
  out.indices.reserve(batch_size);
  out.weights.reserve(batch_size);
  out.probabilities.reserve(batch_size);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double max_w = 0.0;
  for (std::size_t k = 0; k < batch_size; ++k) {
    double prefix = segment * (static_cast<double>(k) + unit(rng));
    prefix = std::min(prefix, std::nextafter(total, 0.0));
    std::size_t idx = tree_.find(prefix);
    if (idx >= items_.size()) idx = items_.size() - 1;
    const double p = tree_.leaf(idx) / total;
    const double w = std::pow(m * p, -per_.beta);
    out.indices.push_back(idx);
    out.probabilities.push_back(p);
    out.weights.push_back(w);
    max_w = std::max(max_w, w);
  }
  for (double& w : out.weights) w /= max_w;
  return out;
}

std::vector<std::size_t> ReplayBuffer::sample_uniform(std::size_t batch_size, std::uint64_t seed) const {
  if (items_.empty() || batch_size == 0) throw NotReadyError("no items for a uniform batch");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(batch_size);
  for (auto& i : out) i = pick(rng);
  return out;
}

void ReplayBuffer::update_priorities(std::span<const std::size_t> indices,
                                     std::span<const double> td_errors) {
  if (indices.size() != td_errors.size()) {
    throw InputError("update_priorities: index and TD error counts differ");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= items_.size()) throw InputError("update_priorities: index out of range");
    double p = std::abs(td_errors[k]) + per_.epsilon;
    if (items_[i].transition.origin == Origin::Demo) p += per_.demo_boost;
    set_priority(i, p);
  }
}

TopUpResult demo_ratio_top_up(ReplayBuffer& buffer, DemoSource& source, const TopUpParams& params) {
  TopUpResult result;
  if (params.target_ratio <= 0.0) return result;
  if (params.target_ratio >= 1.0) throw ConfigError("demo ratio target must be < 1");
  while (buffer.total_count() == 0 || buffer.demo_ratio() < params.target_ratio) {
    auto demo = source.next();
    if (!demo) {
      result.exhausted = true;
      break;
    }
    Episode ingested = *demo;
    ingested.transitions = ingest_demonstration(*demo, params.R, params.b);
    buffer.push_episode(ingested, params.nstep_n, params.gamma);
    result.added += ingested.length();
    result.episodes += 1;
  }
  return result;
}

}  // namespace r2
