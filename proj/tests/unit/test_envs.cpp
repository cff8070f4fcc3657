#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "r2/envs.hpp"
#include "r2/error.hpp"
#include "r2/transitions.hpp"

using namespace r2;
using namespace r2::envs;

namespace {

double chebyshev_from_start(double x, double y) {
  return std::max(std::abs(x - kStartX), std::abs(y - kStartY));
}

}  // namespace

TEST(EnvSpec, Registry) {
  EXPECT_EQ(env_names().size(), 3u);
  EXPECT_EQ(env_spec("reach2d").time_limit, 100);
  EXPECT_EQ(env_spec("button2d").time_limit, 150);
  EXPECT_EQ(env_spec("switch2d").time_limit, 150);
  EXPECT_EQ(env_spec("reach2d").obs_dim, 4);
  EXPECT_EQ(env_spec("button2d").obs_dim, 5);
  EXPECT_EQ(env_spec("switch2d").obs_dim, 8);
  for (const auto& n : env_names()) {
    EXPECT_EQ(env_spec(n).R, 100.0);
    EXPECT_EQ(env_spec(n).success_radius, 0.05);
  }
  EXPECT_THROW(env_spec("pendulum"), ConfigError);
}

TEST(Reset, DeterministicAndFixedStart) {
  for (const auto& n : env_names()) {
    Env a = make_env(n), b = make_env(n);
    EXPECT_EQ(a.reset(5), b.reset(5));
    EXPECT_EQ(a.state(), b.state());
    EXPECT_EQ(a.state().agent_pos, (Vector{kStartX, kStartY}));
    EXPECT_EQ(a.state().step_count, 0);
    EXPECT_NE(a.reset(5), a.reset(6));
  }
}

TEST(Reset, TargetsStayInSpawnRegions) {
  Env reach = make_env("reach2d"), button = make_env("button2d"), sw = make_env("switch2d");
  for (std::uint64_t s = 0; s < 10000; ++s) {
    reach.reset(s);
    const auto& t = reach.state().target_pos;
    ASSERT_GE(t[0], kSpawnMin);
    ASSERT_LE(t[0], kSpawnMax);
    ASSERT_GE(t[1], kSpawnMin);
    ASSERT_LE(t[1], kSpawnMax);
    ASSERT_GE(chebyshev_from_start(t[0], t[1]), kReachMinDistance);

    button.reset(s);
    const auto& bt = button.state().target_pos;
    ASSERT_GE(bt[1], kButtonStripLow);
    ASSERT_LE(bt[1], kSpawnMax);
    ASSERT_GE(bt[0], kSpawnMin);
    ASSERT_LE(bt[0], kSpawnMax);

    sw.reset(s);
    const auto& w = sw.state().wall;
    const double cx = 0.5 * (w[0] + w[2]), cy = 0.5 * (w[1] + w[3]);
    ASSERT_GE(cx, kSwitchCenterMin - 1e-12);
    ASSERT_LE(cx, kSwitchCenterMax + 1e-12);
    ASSERT_GE(cy, kSwitchCenterMin - 1e-12);
    ASSERT_LE(cy, kSwitchCenterMax + 1e-12);
    ASSERT_GE(chebyshev_from_start(cx, cy), kSwitchMinDistance - 1e-12);
    const auto& n = sw.state().wall_normal;
    ASSERT_NEAR(n[0] * n[0] + n[1] * n[1], 1.0, 1e-12);
    for (double v : w) {
      ASSERT_GE(v, kArenaMin);
      ASSERT_LE(v, kArenaMax);
    }
  }
}

TEST(Step, KinematicsAndClipping) {
  Env e = make_env("reach2d");
  e.reset(1);
  auto r = e.step(std::vector<double>{0.02, 0.03});
  EXPECT_NEAR(e.state().agent_pos[0], kStartX + 0.02, 1e-15);
  EXPECT_NEAR(e.state().agent_pos[1], kStartY + 0.03, 1e-15);
  r = e.step(std::vector<double>{1.0, -0.01});  // x clipped to 0.05
  EXPECT_NEAR(e.state().agent_pos[0], kStartX + 0.07, 1e-15);
  EXPECT_NEAR(e.state().agent_pos[1], kStartY + 0.02, 1e-15);
  r = e.step(std::vector<double>{-1.0, -1.0});  // clipped, then held inside the arena
  EXPECT_NEAR(e.state().agent_pos[0], kStartX + 0.02, 1e-15);
  EXPECT_NEAR(e.state().agent_pos[1], std::max(0.0, kStartY - 0.03), 1e-15);
  EXPECT_EQ(e.state().step_count, 3);
  EXPECT_THROW(e.step(std::vector<double>{0.0}), InputError);
}

TEST(Step, ZeroActionTimesOut) {
  for (const auto& n : env_names()) {
    Env e = make_env(n);
    e.reset(3);
    StepResult r;
    int steps = 0;
    while (!e.finished()) {
      r = e.step(std::vector<double>{0.0, 0.0});
      EXPECT_EQ(r.reward, 0.0);
      ++steps;
    }
    EXPECT_EQ(steps, e.spec().time_limit);
    EXPECT_TRUE(r.timed_out);
    EXPECT_FALSE(r.done);
    EXPECT_FALSE(r.success);
    EXPECT_THROW(e.step(std::vector<double>{0.0, 0.0}), UsageError);
  }
}

TEST(Step, ReachSuccessInsideRadius) {
  Env e = make_env("reach2d");
  e.reset(2);
  EnvState s = e.state();
  s.agent_pos = {s.target_pos[0] - 0.06, s.target_pos[1]};
  e.set_state(s);
  const auto r = e.step(std::vector<double>{0.05, 0.0});
  EXPECT_TRUE(r.success);
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, 100.0);
  EXPECT_TRUE(e.finished());
}

TEST(Step, ButtonNeedsHold) {
  Env e = make_env("button2d");
  e.reset(4);
  EnvState s = e.state();
  s.agent_pos = s.target_pos;
  e.set_state(s);
  const std::vector<double> still{0.0, 0.0};
  for (int k = 0; k < kButtonHoldSteps; ++k) {
    const auto r = e.step(still);
    EXPECT_FALSE(r.success) << k;
    EXPECT_NEAR(r.observation[4], (k + 1.0) / (kButtonHoldSteps + 1), 1e-15);
  }
  EXPECT_TRUE(e.step(still).success);

  // Leaving the button resets the press.
  e.set_state(s);
  e.step(still);
  EnvState moved = e.state();
  e.step(std::vector<double>{0.05, 0.05});
  EXPECT_EQ(e.state().press_depth, 0);
  (void)moved;
}

TEST(Step, SwitchWallBlocksAndBackSideDoesNotCount) {
  Env e = make_env("switch2d");
  e.reset(6);
  EnvState s = e.state();
  const double cx = 0.5 * (s.wall[0] + s.wall[2]), cy = 0.5 * (s.wall[1] + s.wall[3]);
  const double nx = s.wall_normal[0], ny = s.wall_normal[1];
  // Just behind the wall, pushing through it.
  s.agent_pos = {cx - 0.015 * nx, cy - 0.015 * ny};
  e.set_state(s);
  const auto r = e.step(std::vector<double>{0.05 * nx, 0.05 * ny});
  EXPECT_EQ(e.state().agent_pos, s.agent_pos);
  EXPECT_FALSE(r.success);
  // Contact radius reached from behind is not a success: the point behind
  // the wall is within 0.05 of the switch.
  EXPECT_LE(std::hypot(s.agent_pos[0] - s.target_pos[0], s.agent_pos[1] - s.target_pos[1]), 0.05);
  // From the front side the same switch counts.
  EnvState f = s;
  f.agent_pos = {s.target_pos[0] + 0.06 * nx, s.target_pos[1] + 0.06 * ny};
  e.set_state(f);
  EXPECT_TRUE(e.step(std::vector<double>{-0.04 * nx, -0.04 * ny}).success);
}

TEST(Step, RewardInvariantsUnderRandomActions) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.08, 0.08);
  for (const auto& n : env_names()) {
    Env e = make_env(n);
    for (std::uint64_t ep = 0; ep < 200; ++ep) {
      e.reset(ep);
      int hundreds = 0, len = 0;
      StepResult r;
      while (!e.finished()) {
        r = e.step(std::vector<double>{u(rng), u(rng)});
        ++len;
        ASSERT_TRUE(r.reward == 0.0 || r.reward == 100.0);
        hundreds += r.reward == 100.0;
        ASSERT_FALSE(r.success && r.timed_out);
        for (int k = 0; k < 2; ++k) {
          ASSERT_GE(e.state().agent_pos[k], kArenaMin);
          ASSERT_LE(e.state().agent_pos[k], kArenaMax);
        }
      }
      EXPECT_LE(len, e.spec().time_limit);
      EXPECT_EQ(hundreds, r.success ? 1 : 0);
    }
  }
}

TEST(Step, TraceIsPureFunctionOfSeedAndActions) {
  std::mt19937_64 rng(8);
  std::vector<std::vector<double>> actions;
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  for (int i = 0; i < 150; ++i) actions.push_back({u(rng), u(rng)});
  for (const auto& n : env_names()) {
    Env a = make_env(n), b = make_env(n);
    a.reset(11);
    b.reset(11);
    for (const auto& act : actions) {
      if (a.finished()) break;
      const auto ra = a.step(act), rb = b.step(act);
      ASSERT_EQ(ra.observation, rb.observation);
      ASSERT_EQ(ra.reward, rb.reward);
    }
  }
}

TEST(SetState, RoundTripAndErrors) {
  for (const auto& n : env_names()) {
    Env e = make_env(n);
    const Vector obs = e.reset(9);
    const EnvState s = e.state();
    Env f = make_env(n);
    EXPECT_EQ(f.set_state(s), obs);
    EXPECT_EQ(f.state(), s);
    EnvState bad = s;
    bad.agent_pos = {1.2, 0.5};
    EXPECT_THROW(f.set_state(bad), InputError);
    bad = s;
    bad.step_count = e.spec().time_limit;
    EXPECT_THROW(f.set_state(bad), InputError);
  }
}

TEST(StateFromObservation, RecoversState) {
  for (const auto& n : env_names()) {
    Env e = make_env(n);
    const Vector obs = e.reset(10);
    const EnvState s = state_from_observation(e.spec(), obs);
    EXPECT_EQ(s.agent_pos, e.state().agent_pos);
    EXPECT_EQ(s.target_pos, e.state().target_pos);
    if (n == "switch2d") {
      EXPECT_NEAR(s.wall_normal[0], e.state().wall_normal[0], 1e-9);
      EXPECT_NEAR(s.wall_normal[1], e.state().wall_normal[1], 1e-9);
    }
  }
}

TEST(Expert, NearZeroActionAtTarget) {
  Env e = make_env("reach2d");
  e.reset(1);
  EnvState s = e.state();
  s.agent_pos = s.target_pos;
  const Vector a = scripted_expert(e.spec(), s);
  EXPECT_EQ(a, (Vector{0.0, 0.0}));
}

TEST(Expert, SolvesEveryResetWithinBounds) {
  for (const auto& n : env_names()) {
    Env e = make_env(n);
    double total = 0.0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
      e.reset(s);
      const Episode ep = rollout_expert(e, 0);
      ASSERT_TRUE(ep.success) << n << " seed " << s;
      total += static_cast<double>(ep.length());
      for (const auto& t : ep.transitions) {
        ASSERT_LE(std::abs(t.action[0]), 0.05);
        ASSERT_LE(std::abs(t.action[1]), 0.05);
      }
    }
    const double mean = total / 1000.0;
    EXPECT_GE(mean, 10.0) << n;
    EXPECT_LE(mean, 30.0) << n;
  }
}

TEST(Expert, SucceedsFromMidDemoStates) {
  for (const auto& n : env_names()) {
    const DemoSet d = generate_demos(n, 50, 3);
    Env e = make_env(n);
    for (const auto& ep : d.episodes) {
      for (std::size_t k = 0; k < ep.length(); k += 3) {
        e.set_state(state_from_observation(e.spec(), ep.transitions[k].state));
        ASSERT_TRUE(rollout_expert(e, 0).success) << n;
      }
    }
  }
}

TEST(Demos, GenerateCountsAndDeterminism) {
  const DemoSet a = generate_demos("reach2d", 200, 4);
  EXPECT_EQ(a.episodes.size(), 200u);
  for (const auto& ep : a.episodes) {
    EXPECT_TRUE(ep.success);
    EXPECT_EQ(ep.transitions.back().reward, 100.0);
  }
  EXPECT_EQ(a.avg_length, average_length(a.episodes));
  const DemoSet b = generate_demos("reach2d", 200, 4);
  for (std::size_t i = 0; i < 200; ++i) EXPECT_EQ(a.episodes[i], b.episodes[i]);
  EXPECT_EQ(generate_demos("button2d", 100, 1).episodes.size(), 100u);
  EXPECT_THROW(generate_demos("reach2d", 0, 1), ConfigError);
}

TEST(Demos, SourceHonorsLimitAndIds) {
  ExpertDemoSource src("switch2d", 5, 2);
  const auto a = src.next();
  const auto b = src.next();
  ASSERT_TRUE(a && b);
  EXPECT_EQ(a->transitions[0].episode_id, -1);
  EXPECT_EQ(b->transitions[0].episode_id, -2);
  EXPECT_FALSE(src.next().has_value());
}
