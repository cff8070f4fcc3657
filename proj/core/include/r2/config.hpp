#pragma once

// Run configuration: flat `key = value` text whose keys mirror the
// RunConfig / AgentConfig field names, plus named variant presets.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "r2/agents.hpp"

namespace r2 {

struct RunConfig {
  AgentConfig agent;
  std::string variant = "sac_r2";
  std::string env = "reach2d";
  int demo_count = 200;
  std::string demo_file;  // empty: generate with the scripted expert
  std::uint64_t demo_seed = 1000;
  bool demos_in_buffer = true;  // false keeps demos only in the BC demo store
  bool demo_topup = true;
  double demo_ratio_target = 0.1;
  long total_env_steps = 100000;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int pretrain_iters = 3000;
  int random_warmup = 1000;
  long buffer_capacity = 200000;
  int rolling_window = 100;
  int hold_window = 100;
  std::vector<double> thresholds{0.5, 0.9};
  int eval_every = 0;     // episodes between greedy evaluations; 0 disables
  int eval_episodes = 10;
  bool record_wall_time = false;  // wall_time stays 0 so metrics are reproducible

  void validate() const;
  // Environment steps collected per gradient update (batch / replay ratio).
  int env_steps_per_update() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// `key = value` lines; '#' starts a comment. Throws ConfigError with the
// line number on malformed lines.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_value_file(const std::string& path);

// Applies one key. Throws ConfigError for unknown keys or bad values.
void apply_key(RunConfig& config, const std::string& key, const std::string& value);

// A `variant` key is applied first (it resets flags to the preset), then all
// other keys in order. Keys of the form `<label>.<key>` are skipped here.
void apply_key_values(RunConfig& config, const KeyValues& kv);

// Preset names: sac, sac_demo, sac_r2, sac_r2_norelabel, sac_fd, sac_bc,
// sac_r2star and the ddpg_* counterparts, optionally suffixed with
// `_nodemo` (no demonstrations) or `_lowdata` (100 demos, no top-up).
void apply_variant(RunConfig& config, const std::string& name);
std::vector<std::string> variant_names();

// Every field, one `key = value` per entry, in a stable order.
KeyValues config_echo(const RunConfig& config);
std::string config_to_text(const RunConfig& config);

}  // namespace r2
