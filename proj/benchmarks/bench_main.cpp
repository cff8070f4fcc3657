#include <random>

#include <benchmark/benchmark.h>

#include "r2/agents.hpp"
#include "r2/envs.hpp"
#include "r2/net.hpp"
#include "r2/replay.hpp"
#include "r2/seed.hpp"

using namespace r2;

static void BM_ForwardBatch(benchmark::State& state) {
  const int width = static_cast<int>(state.range(0));
  net::MlpShape shape{{6, width, width, 1}, net::OutputActivation::Identity};
  const auto p = net::init_mlp(shape, 1);
  const net::Matrix x = standard_normal(6, 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(net::forward_batch(p, shape, x));
}
BENCHMARK(BM_ForwardBatch)->Arg(64)->Arg(256);

static void BM_SumTreeSetFind(benchmark::State& state) {
  SumTree t(static_cast<std::size_t>(state.range(0)));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < t.leaf_count(); ++i) t.set(i, u(rng));
  for (auto _ : state) {
    t.set(rng() % t.leaf_count(), u(rng));
    benchmark::DoNotOptimize(t.find(u(rng) * t.total()));
  }
}
BENCHMARK(BM_SumTreeSetFind)->Arg(1 << 12)->Arg(1 << 18);

static void BM_SamplePrioritized(benchmark::State& state) {
  ReplayBuffer buf(1 << 16, PerConfig{});
  auto demos = envs::generate_demos("reach2d", 200, 3);
  for (const auto& ep : demos.episodes) buf.push_episode(ep, 5, 0.99);
  std::uint64_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(buf.sample_prioritized(64, mix_seed(9, k++)));
}
BENCHMARK(BM_SamplePrioritized);

static void BM_SacUpdate(benchmark::State& state) {
  const auto spec = envs::env_spec("reach2d");
  AgentConfig c;
  SacLearner l(spec.obs_dim, spec.action_low, spec.action_high, c, 1);
  ReplayBuffer buf(1 << 14, PerConfig{});
  for (const auto& ep : envs::generate_demos("reach2d", 100, 3).episodes) buf.push_episode(ep, 5, c.gamma);
  std::uint64_t k = 0;
  for (auto _ : state) {
    const auto s = buf.sample_prioritized(64, mix_seed(4, k));
    const auto tb = TransitionBatch::from_replay(buf, s.indices, c.gamma, false);
    l.critic_update(tb, l.targets(tb, mix_seed(5, k)), s.weights, c.l2_critic);
    l.actor_update(tb.states, c.l2_actor, mix_seed(6, k));
    l.soft_update_targets(c.tau);
    ++k;
  }
}
BENCHMARK(BM_SacUpdate);
BENCHMARK_MAIN();
