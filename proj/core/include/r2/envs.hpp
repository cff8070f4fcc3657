#pragma once

// Planar sparse-reward tasks on the unit square: reach a target, press a
// floor button (arrive, then hold), and flip a switch mounted on a wall that
// must be approached from its open side. Scripted experts solve all three.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "r2/replay.hpp"
#include "r2/transitions.hpp"

namespace r2::envs {

enum class TaskKind { Reach, Button, Switch };

struct EnvSpec {
  std::string name;
  TaskKind kind = TaskKind::Reach;
  int obs_dim = 4;
  int act_dim = 2;
  Vector action_low;
  Vector action_high;
  int time_limit = 100;
  double success_radius = 0.05;
  double R = 100.0;
};

struct EnvState {
  Vector agent_pos{0.0, 0.0};
  Vector target_pos{0.0, 0.0};  // button or switch contact point for those tasks
  int step_count = 0;
  Vector wall;  // switch2d: x0, y0, x1, y1 (front normal is stored separately)
  Vector wall_normal;  // switch2d: unit normal pointing to the open side
  int press_depth = 0;  // button2d: consecutive steps inside the button

  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  Vector observation;
  double reward = 0.0;
  bool done = false;
  bool success = false;
  bool timed_out = false;
};

// Names accepted by make_env.
std::vector<std::string> env_names();
EnvSpec env_spec(const std::string& name);

inline constexpr double kArenaMin = 0.0;
inline constexpr double kArenaMax = 1.0;
inline constexpr double kStartX = 0.05;
inline constexpr double kStartY = 0.05;
// Spawn regions. Reach targets: [0.05, 0.95]^2 at Chebyshev distance
// >= kReachMinDistance from the start. Buttons: top strip. Switch centers:
// [0.2, 0.85]^2 at Chebyshev distance >= kSwitchMinDistance.
inline constexpr double kSpawnMin = 0.05;
inline constexpr double kSpawnMax = 0.95;
inline constexpr double kReachMinDistance = 0.7;
inline constexpr double kButtonStripLow = 0.8;
inline constexpr double kSwitchCenterMin = 0.2;
inline constexpr double kSwitchCenterMax = 0.85;
inline constexpr double kSwitchMinDistance = 0.5;
inline constexpr int kButtonHoldSteps = 2;
inline constexpr double kWallHalfLength = 0.12;
inline constexpr double kSwitchOffset = 0.03;

class Env {
 public:
  explicit Env(EnvSpec spec);

  const EnvSpec& spec() const { return spec_; }
  const EnvState& state() const { return state_; }
  bool finished() const { return finished_; }

  // Fixed agent start; target (and wall) drawn from the spawn region.
  Vector reset(std::uint64_t seed);

  // Clips the action to bounds, integrates position with dt = 1. Throws
  // UsageError after the episode has ended.
  StepResult step(std::span<const double> action);

  // Replaces the internal state. Throws InputError outside the arena.
  Vector set_state(const EnvState& state);

  Vector observe() const;

 private:
  bool task_solved() const;

  EnvSpec spec_;
  EnvState state_;
  bool finished_ = true;
};

Env make_env(const std::string& name);

// Rebuilds a fresh-episode state (step_count 0) from an observation, used to
// start episodes from demonstration states.
EnvState state_from_observation(const EnvSpec& spec, std::span<const double> observation);

// Proportional controller toward the current sub-goal, scaled to respect the
// per-dimension action bound.
Vector scripted_expert(const EnvSpec& spec, const EnvState& state);

// Runs the expert from the env's current state until the episode ends.
Episode rollout_expert(Env& env, std::int64_t episode_id);

// count expert episodes from seeded resets. Throws std::runtime_error if the
// expert ever fails.
DemoSet generate_demos(const std::string& env_name, int count, std::uint64_t seed);

// Endless stream of fresh expert demonstrations, used to keep the demo ratio.
class ExpertDemoSource : public DemoSource {
 public:
  ExpertDemoSource(const std::string& env_name, std::uint64_t seed,
                   std::optional<std::size_t> limit = std::nullopt);
  std::optional<Episode> next() override;
  std::size_t produced() const { return produced_; }

 private:
  Env env_;
  std::uint64_t seed_;
  std::optional<std::size_t> limit_;
  std::size_t produced_ = 0;
};

}  // namespace r2::envs
