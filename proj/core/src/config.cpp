#include "r2/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "r2/envs.hpp"
#include "r2/error.hpp"

namespace r2 {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs, std::function<std::string(const T&)> f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += f(xs[i]);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  agent.validate();
  envs::env_spec(env);
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (total_env_steps <= 0) throw ConfigError("total_env_steps must be > 0");
  if (demo_count < 0 || pretrain_iters < 0 || random_warmup < 0) {
    throw ConfigError("demo_count, pretrain_iters and random_warmup must be >= 0");
  }
  if (demo_ratio_target < 0.0 || demo_ratio_target >= 1.0) {
    throw ConfigError("demo_ratio_target must lie in [0, 1)");
  }
  if (buffer_capacity <= 0) throw ConfigError("buffer_capacity must be > 0");
  if (rolling_window < 1 || hold_window < 1) throw ConfigError("windows must be >= 1");
  for (double t : thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError("thresholds must lie in (0, 1]");
  }
  if (eval_every < 0 || eval_episodes < 1) throw ConfigError("bad evaluation settings");
  if (agent.batch_size % agent.replay_ratio != 0) {
    throw ConfigError("batch_size must be a multiple of replay_ratio");
  }
}

int RunConfig::env_steps_per_update() const { return agent.batch_size / agent.replay_ratio; }

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

KeyValues read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_key_values(os.str());
}

std::vector<std::string> variant_names() {
  return {"sac", "sac_demo", "sac_r2", "sac_r2_norelabel", "sac_fd", "sac_bc", "sac_r2star",
          "ddpg", "ddpg_demo", "ddpg_r2", "ddpg_r2_norelabel", "ddpg_fd", "ddpg_bc", "ddpg_r2star"};
}

void apply_variant(RunConfig& c, const std::string& full_name) {
  std::string name = full_name;
  bool nodemo = false;
  bool lowdata = false;
  auto strip = [&name](const std::string& suffix) {
    if (name.size() > suffix.size() && name.ends_with(suffix)) {
      name.resize(name.size() - suffix.size());
      return true;
    }
    return false;
  };
  if (strip("_nodemo")) nodemo = true;
  if (strip("_lowdata")) lowdata = true;

  AgentConfig& a = c.agent;
  std::string base = name;
  if (name.starts_with("sac")) {
    a.algo = Algo::SAC;
    base = name.substr(3);
    a.b = 7.0;
  } else if (name.starts_with("ddpg")) {
    a.algo = Algo::DDPG;
    base = name.substr(4);
    a.b = 3.0;
  } else {
    throw ConfigError("unknown variant '" + full_name + "'");
  }
  a.use_r2 = a.use_nstep = a.use_bc = a.use_demo_boost = a.use_demo_resets = false;
  a.relabel_online = true;
  c.demos_in_buffer = true;
  c.demo_topup = true;
  c.demo_count = 200;

  if (base.empty()) {
    c.demo_count = 0;
  } else if (base == "_demo") {
  } else if (base == "_r2") {
    a.use_r2 = true;
  } else if (base == "_r2_norelabel") {
    a.use_r2 = true;
    a.relabel_online = false;
  } else if (base == "_fd") {
    a.use_nstep = true;
    a.use_demo_boost = true;
  } else if (base == "_bc") {
    a.use_bc = true;
    a.use_demo_resets = true;
    c.demos_in_buffer = false;
  } else if (base == "_r2star") {
    a.use_r2 = true;
    a.use_nstep = true;
    a.use_bc = true;
  } else {
    throw ConfigError("unknown variant '" + full_name + "'");
  }
  if (nodemo) c.demo_count = 0;
  if (lowdata) {
    c.demo_count = 100;
    c.demo_topup = false;
  }
  c.variant = full_name;
}

void apply_key(RunConfig& c, const std::string& key, const std::string& v) {
  AgentConfig& a = c.agent;
  auto d = [&](double& f) { f = to_double(key, v); };
  auto i = [&](int& f) { f = static_cast<int>(to_int(key, v)); };
  auto l = [&](long& f) { f = static_cast<long>(to_int(key, v)); };
  auto b = [&](bool& f) { f = to_bool(key, v); };

  if (key == "variant") apply_variant(c, v);
  else if (key == "algo") a.algo = algo_from_string(v);
  else if (key == "gamma") d(a.gamma);
  else if (key == "alpha") d(a.alpha);
  else if (key == "tau") d(a.tau);
  else if (key == "lr_actor") d(a.lr_actor);
  else if (key == "lr_critic") d(a.lr_critic);
  else if (key == "batch_size") i(a.batch_size);
  else if (key == "replay_ratio") i(a.replay_ratio);
  else if (key == "b") d(a.b);
  else if (key == "N") i(a.N);
  else if (key == "R") d(a.R);
  else if (key == "lambda_bc") d(a.lambda_bc);
  else if (key == "bc_batch_size") i(a.bc_batch_size);
  else if (key == "lambda_n") d(a.lambda_n);
  else if (key == "n") i(a.n);
  else if (key == "l2_actor") d(a.l2_actor);
  else if (key == "l2_critic") d(a.l2_critic);
  else if (key == "per_alpha") d(a.per_alpha);
  else if (key == "per_beta") d(a.per_beta);
  else if (key == "per_beta_final") d(a.per_beta_final);
  else if (key == "per_epsilon") d(a.per_epsilon);
  else if (key == "demo_boost") d(a.demo_boost);
  else if (key == "bc_reset_fraction") d(a.bc_reset_fraction);
  else if (key == "sigma_explore") d(a.sigma_explore);
  else if (key == "hidden") {
    a.hidden.clear();
    for (const auto& s : split_list(v)) a.hidden.push_back(static_cast<int>(to_int(key, s)));
  }
  else if (key == "use_r2") b(a.use_r2);
  else if (key == "relabel_online") b(a.relabel_online);
  else if (key == "use_nstep") b(a.use_nstep);
  else if (key == "use_bc") b(a.use_bc);
  else if (key == "use_demo_boost") b(a.use_demo_boost);
  else if (key == "use_demo_resets") b(a.use_demo_resets);
  else if (key == "env") c.env = v;
  else if (key == "demo_count") i(c.demo_count);
  else if (key == "demo_file") c.demo_file = v;
  else if (key == "demo_seed") c.demo_seed = static_cast<std::uint64_t>(to_int(key, v));
  else if (key == "demos_in_buffer") b(c.demos_in_buffer);
  else if (key == "demo_topup") b(c.demo_topup);
  else if (key == "demo_ratio_target") d(c.demo_ratio_target);
  else if (key == "total_env_steps") l(c.total_env_steps);
  else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& s : split_list(v)) c.seeds.push_back(static_cast<std::uint64_t>(to_int(key, s)));
  }
  else if (key == "pretrain_iters") i(c.pretrain_iters);
  else if (key == "random_warmup") i(c.random_warmup);
  else if (key == "buffer_capacity") l(c.buffer_capacity);
  else if (key == "rolling_window") i(c.rolling_window);
  else if (key == "hold_window") i(c.hold_window);
  else if (key == "thresholds") {
    c.thresholds.clear();
    for (const auto& s : split_list(v)) c.thresholds.push_back(to_double(key, s));
  }
  else if (key == "eval_every") i(c.eval_every);
  else if (key == "eval_episodes") i(c.eval_episodes);
  else if (key == "record_wall_time") b(c.record_wall_time);
  else throw ConfigError("unknown config key '" + key + "'");
}

void apply_key_values(RunConfig& config, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "variant") apply_key(config, k, v);
  }
  for (const auto& [k, v] : kv) {
    if (k == "variant" || k == "variants" || k.find('.') != std::string::npos) continue;
    apply_key(config, k, v);
  }
}

KeyValues config_echo(const RunConfig& c) {
  const AgentConfig& a = c.agent;
  auto B = [](bool x) { return std::string(x ? "true" : "false"); };
  auto D = [](double x) { return fmt_double(x); };
  auto I = [](long long x) { return std::to_string(x); };
  return {
      {"variant", c.variant},
      {"env", c.env},
      {"algo", to_string(a.algo)},
      {"gamma", D(a.gamma)},
      {"alpha", D(a.alpha)},
      {"tau", D(a.tau)},
      {"lr_actor", D(a.lr_actor)},
      {"lr_critic", D(a.lr_critic)},
      {"batch_size", I(a.batch_size)},
      {"replay_ratio", I(a.replay_ratio)},
      {"b", D(a.b)},
      {"N", I(a.N)},
      {"R", D(a.R)},
      {"lambda_bc", D(a.lambda_bc)},
      {"bc_batch_size", I(a.bc_batch_size)},
      {"lambda_n", D(a.lambda_n)},
      {"n", I(a.n)},
      {"l2_actor", D(a.l2_actor)},
      {"l2_critic", D(a.l2_critic)},
      {"per_alpha", D(a.per_alpha)},
      {"per_beta", D(a.per_beta)},
      {"per_beta_final", D(a.per_beta_final)},
      {"per_epsilon", D(a.per_epsilon)},
      {"demo_boost", D(a.demo_boost)},
      {"bc_reset_fraction", D(a.bc_reset_fraction)},
      {"sigma_explore", D(a.sigma_explore)},
      {"hidden", join<int>(a.hidden, [](const int& h) { return std::to_string(h); })},
      {"use_r2", B(a.use_r2)},
      {"relabel_online", B(a.relabel_online)},
      {"use_nstep", B(a.use_nstep)},
      {"use_bc", B(a.use_bc)},
      {"use_demo_boost", B(a.use_demo_boost)},
      {"use_demo_resets", B(a.use_demo_resets)},
      {"demo_count", I(c.demo_count)},
      {"demo_file", c.demo_file},
      {"demo_seed", std::to_string(c.demo_seed)},
      {"demos_in_buffer", B(c.demos_in_buffer)},
      {"demo_topup", B(c.demo_topup)},
      {"demo_ratio_target", D(c.demo_ratio_target)},
      {"total_env_steps", I(c.total_env_steps)},
      {"seeds", join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); })},
      {"pretrain_iters", I(c.pretrain_iters)},
      {"random_warmup", I(c.random_warmup)},
      {"buffer_capacity", I(c.buffer_capacity)},
      {"rolling_window", I(c.rolling_window)},
      {"hold_window", I(c.hold_window)},
      {"thresholds", join<double>(c.thresholds, [](const double& t) { return fmt_double(t); })},
      {"eval_every", I(c.eval_every)},
      {"eval_episodes", I(c.eval_episodes)},
      {"record_wall_time", B(c.record_wall_time)},
  };
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_echo(config)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace r2
