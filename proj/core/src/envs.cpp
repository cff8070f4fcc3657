#include "r2/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "r2/error.hpp"
#include "r2/seed.hpp"

namespace r2::envs {

namespace {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
Vec2 as_vec2(const Vector& v) { return {v.at(0), v.at(1)}; }

bool in_arena(const Vector& p) {
  return p.size() == 2 && p[0] >= kArenaMin && p[0] <= kArenaMax && p[1] >= kArenaMin &&
         p[1] <= kArenaMax;
}

// Proper intersection of segments [p, q] and [a, b], touching included.
bool segments_intersect(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
  const double d1 = cross(q - p, a - p);
  const double d2 = cross(q - p, b - p);
  const double d3 = cross(b - a, p - a);
  const double d4 = cross(b - a, q - a);
  return ((d1 > 0) != (d2 > 0) || d1 == 0 || d2 == 0) &&
         ((d3 > 0) != (d4 > 0) || d3 == 0 || d4 == 0) &&
         !(d1 == 0 && d2 == 0);  // collinear sliding along the wall is allowed
}

struct WallFrame {
  Vec2 center;
  Vec2 normal;
  Vec2 tangent;
};

WallFrame wall_frame(const EnvState& s) {
  const Vec2 a{s.wall[0], s.wall[1]};
  const Vec2 b{s.wall[2], s.wall[3]};
  const Vec2 n = as_vec2(s.wall_normal);
  return {0.5 * (a + b), n, Vec2{-n.y, n.x}};
}

}  // namespace

std::vector<std::string> env_names() { return {"reach2d", "button2d", "switch2d"}; }

EnvSpec env_spec(const std::string& name) {
  EnvSpec s;
  s.name = name;
  s.action_low = {-0.05, -0.05};
  s.action_high = {0.05, 0.05};
  if (name == "reach2d") {
    s.kind = TaskKind::Reach;
    s.obs_dim = 4;
    s.time_limit = 100;
  } else if (name == "button2d") {
    s.kind = TaskKind::Button;
    s.obs_dim = 5;
    s.time_limit = 150;
  } else if (name == "switch2d") {
    s.kind = TaskKind::Switch;
    s.obs_dim = 8;
    s.time_limit = 150;
  } else {
    throw ConfigError("unknown environment '" + name + "'");
  }
  return s;
}

Env::Env(EnvSpec spec) : spec_(std::move(spec)) {
  if (spec_.time_limit <= 0 || !(spec_.success_radius > 0.0)) {
    throw ConfigError("environment needs time_limit > 0 and success_radius > 0");
  }
}

Env make_env(const std::string& name) { return Env(env_spec(name)); }

Vector Env::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  EnvState s;
  s.agent_pos = {kStartX, kStartY};
  switch (spec_.kind) {
    case TaskKind::Reach: {
      const double span = kSpawnMax - kSpawnMin;
      Vec2 g;
      do {
        g = {kSpawnMin + span * unit(rng), kSpawnMin + span * unit(rng)};
      } while (std::max(g.x - kStartX, g.y - kStartY) < kReachMinDistance);
      s.target_pos = {g.x, g.y};
      break;
    }
    case TaskKind::Button:
      // Buttons sit along the top edge, across the arena from the start.
      s.target_pos = {kSpawnMin + (kSpawnMax - kSpawnMin) * unit(rng),
                      kButtonStripLow + (kSpawnMax - kButtonStripLow) * unit(rng)};
      break;
    case TaskKind::Switch: {
      const double span = kSwitchCenterMax - kSwitchCenterMin;
      Vec2 c;
      do {
        c = {kSwitchCenterMin + span * unit(rng), kSwitchCenterMin + span * unit(rng)};
      } while (std::max(c.x - kStartX, c.y - kStartY) < kSwitchMinDistance);
      const Vec2 to_start = Vec2{kStartX, kStartY} - c;
      const double base = std::atan2(to_start.y, to_start.x);
      const double psi = (unit(rng) * 2.0 - 1.0) * 2.0 * std::numbers::pi / 3.0;
      const Vec2 n{std::cos(base + psi), std::sin(base + psi)};
      const Vec2 t{-n.y, n.x};
      const Vec2 a = c - kWallHalfLength * t;
      const Vec2 b = c + kWallHalfLength * t;
      s.wall = {a.x, a.y, b.x, b.y};
      s.wall_normal = {n.x, n.y};
      const Vec2 sw = c + kSwitchOffset * n;
      s.target_pos = {sw.x, sw.y};
      break;
    }
  }
  state_ = std::move(s);
  finished_ = false;
  return observe();
}

Vector Env::observe() const {
  Vector obs{state_.agent_pos[0], state_.agent_pos[1], state_.target_pos[0], state_.target_pos[1]};
  if (spec_.kind == TaskKind::Button) {
    obs.push_back(static_cast<double>(state_.press_depth) / (kButtonHoldSteps + 1));
  } else if (spec_.kind == TaskKind::Switch) {
    obs.insert(obs.end(), state_.wall.begin(), state_.wall.end());
  }
  return obs;
}

bool Env::task_solved() const {
  const Vec2 p = as_vec2(state_.agent_pos);
  const Vec2 g = as_vec2(state_.target_pos);
  const bool contact = norm(p - g) <= spec_.success_radius;
  switch (spec_.kind) {
    case TaskKind::Reach:
      return contact;
    case TaskKind::Button:
      return state_.press_depth >= kButtonHoldSteps + 1;
    case TaskKind::Switch: {
      const auto f = wall_frame(state_);
      return contact && dot(p - f.center, f.normal) > 0.0;
    }
  }
  return false;
}

StepResult Env::step(std::span<const double> action) {
  if (finished_) throw UsageError("step() called on a finished episode; call reset() first");
  if (action.size() != static_cast<std::size_t>(spec_.act_dim)) {
    throw InputError("action dimension mismatch");
  }
  Vec2 a{std::clamp(action[0], spec_.action_low[0], spec_.action_high[0]),
         std::clamp(action[1], spec_.action_low[1], spec_.action_high[1])};
  const Vec2 p = as_vec2(state_.agent_pos);
  Vec2 q = p + a;
  q.x = std::clamp(q.x, kArenaMin, kArenaMax);
  q.y = std::clamp(q.y, kArenaMin, kArenaMax);
  if (spec_.kind == TaskKind::Switch) {
    const Vec2 w0{state_.wall[0], state_.wall[1]};
    const Vec2 w1{state_.wall[2], state_.wall[3]};
    if (segments_intersect(p, q, w0, w1)) q = p;  // blocked by the wall
  }
  state_.agent_pos = {q.x, q.y};
  state_.step_count += 1;
  if (spec_.kind == TaskKind::Button) {
    const bool inside = norm(q - as_vec2(state_.target_pos)) <= spec_.success_radius;
    state_.press_depth = inside ? state_.press_depth + 1 : 0;
  }

  StepResult r;
  r.success = task_solved();
  r.done = r.success;
  r.reward = r.success ? spec_.R : 0.0;
  r.timed_out = !r.success && state_.step_count >= spec_.time_limit;
  finished_ = r.success || r.timed_out;
  r.observation = observe();
  return r;
}

Vector Env::set_state(const EnvState& state) {
  if (!in_arena(state.agent_pos) || !in_arena(state.target_pos)) {
    throw InputError("set_state: positions must lie inside the unit arena");
  }
  if (state.step_count < 0 || state.step_count >= spec_.time_limit) {
    throw InputError("set_state: step_count outside [0, time_limit)");
  }
  if (spec_.kind == TaskKind::Switch) {
    if (state.wall.size() != 4 || state.wall_normal.size() != 2) {
      throw InputError("set_state: switch2d needs a wall segment and normal");
    }
    if (!in_arena({state.wall[0], state.wall[1]}) || !in_arena({state.wall[2], state.wall[3]})) {
      throw InputError("set_state: wall outside the arena");
    }
  }
  if (state.press_depth < 0) throw InputError("set_state: negative press depth");
  state_ = state;
  finished_ = false;
  return observe();
}

EnvState state_from_observation(const EnvSpec& spec, std::span<const double> obs) {
  if (obs.size() != static_cast<std::size_t>(spec.obs_dim)) {
    throw InputError("observation length does not match " + spec.name);
  }
  EnvState s;
  s.agent_pos = {obs[0], obs[1]};
  s.target_pos = {obs[2], obs[3]};
  if (spec.kind == TaskKind::Button) {
    s.press_depth = static_cast<int>(std::lround(obs[4] * (kButtonHoldSteps + 1)));
  } else if (spec.kind == TaskKind::Switch) {
    s.wall.assign(obs.begin() + 4, obs.begin() + 8);
    const Vec2 c{0.5 * (obs[4] + obs[6]), 0.5 * (obs[5] + obs[7])};
    const Vec2 n = (1.0 / kSwitchOffset) * (Vec2{obs[2], obs[3]} - c);
    const double len = norm(n);
    s.wall_normal = {n.x / len, n.y / len};
  }
  return s;
}

Vector scripted_expert(const EnvSpec& spec, const EnvState& state) {
  const Vec2 p = as_vec2(state.agent_pos);
  Vec2 goal = as_vec2(state.target_pos);
  if (spec.kind == TaskKind::Switch) {
    const auto f = wall_frame(state);
    const double depth = dot(p - f.center, f.normal);
    const double lateral = dot(p - f.center, f.tangent);
    if (depth > 0.0) {
      if (std::abs(lateral) > 0.02) goal = f.center + 0.15 * f.normal;
    } else if (std::abs(lateral) < kWallHalfLength + 0.06) {
      const double side = lateral >= 0.0 ? 1.0 : -1.0;
      goal = p + (side * (kWallHalfLength + 0.08) - lateral) * f.tangent;
    } else {
      goal = p + (0.1 - depth) * f.normal;
    }
    goal.x = std::clamp(goal.x, kArenaMin, kArenaMax);
    goal.y = std::clamp(goal.y, kArenaMin, kArenaMax);
  }
  Vec2 d = goal - p;
  const double bound = std::min(spec.action_high[0], spec.action_high[1]);
  const double peak = std::max(std::abs(d.x), std::abs(d.y));
  if (peak > bound) d = (bound / peak) * d;
  return {std::clamp(d.x, -bound, bound), std::clamp(d.y, -bound, bound)};
}

Episode rollout_expert(Env& env, std::int64_t episode_id) {
  Episode ep;
  Vector obs = env.observe();
  std::int64_t step = 0;
  while (!env.finished()) {
    const Vector a = scripted_expert(env.spec(), env.state());
    StepResult r = env.step(a);
    Transition t;
    t.state = std::move(obs);
    t.action = a;
    t.reward = r.reward;
    t.next_state = r.observation;
    t.done = r.done;
    t.origin = Origin::Demo;
    t.episode_id = episode_id;
    t.step_index = step++;
    ep.transitions.push_back(std::move(t));
    obs = std::move(r.observation);
    ep.success = r.success;
    ep.timed_out = r.timed_out;
  }
  return ep;
}

DemoSet generate_demos(const std::string& env_name, int count, std::uint64_t seed) {
  if (count < 1) throw ConfigError("demo count must be >= 1");
  ExpertDemoSource source(env_name, seed);
  DemoSet demos;
  demos.source_seed = seed;
  for (int i = 0; i < count; ++i) demos.episodes.push_back(*source.next());
  demos.avg_length = average_length(demos.episodes);
  return demos;
}

ExpertDemoSource::ExpertDemoSource(const std::string& env_name, std::uint64_t seed,
                                   std::optional<std::size_t> limit)
    : env_(make_env(env_name)), seed_(seed), limit_(limit) {}

std::optional<Episode> ExpertDemoSource::next() {
  if (limit_ && produced_ >= *limit_) return std::nullopt;
  env_.reset(mix_seed(seed_, produced_));
  const auto id = -static_cast<std::int64_t>(produced_) - 1;
  Episode ep = rollout_expert(env_, id);
  if (!ep.success) {
    throw std::runtime_error("scripted expert failed on " + env_.spec().name + " demo " +
                             std::to_string(produced_));
  }
  ++produced_;
  return ep;
}

}  // namespace r2::envs
