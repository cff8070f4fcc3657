// r2: demo generation, training, experiment matrix, b-sweep and evaluation.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "r2/config.hpp"
#include "r2/envs.hpp"
#include "r2/error.hpp"
#include "r2/harness.hpp"
#include "r2/transitions.hpp"

namespace {

// File values first, then each --set key=value in order.
r2::KeyValues load_settings(const std::string& config_path, const std::vector<std::string>& sets) {
  r2::KeyValues kv;
  if (!config_path.empty()) kv = r2::read_key_value_file(config_path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw r2::ConfigError("--set expects key=value, got '" + s + "'");
    auto trim = [](std::string x) {
      x.erase(0, x.find_first_not_of(" \t"));
      x.erase(x.find_last_not_of(" \t") + 1);
      return x;
    };
    kv.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return kv;
}

void print_config(const r2::RunConfig& c) {
  for (const auto& [k, v] : r2::config_echo(c)) std::cerr << "# " << k << " = " << v << '\n';
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (item.find_first_not_of(" \t", used) != std::string::npos) {
      throw r2::ConfigError("bad value '" + item + "' in --values");
    }
    out.push_back(v);
  }
  if (out.empty()) throw r2::ConfigError("--values is empty");
  return out;
}

int report(const std::vector<r2::RunSummary>& runs, const std::string& out_dir) {
  int failed = 0;
  for (const auto& r : runs) {
    std::cout << r.label << " seed=" << r.seed;
    if (!r.ok) {
      ++failed;
      std::cout << " FAILED: " << r.error << '\n';
      continue;
    }
    std::cout << " final_rolling_success=" << r.final_rolling_success;
    for (std::size_t t = 0; t < r.train_steps_to_threshold.size(); ++t) {
      const auto& s = r.train_steps_to_threshold[t];
      std::cout << " steps[" << t << "]=" << (s ? std::to_string(*s) : "none");
    }
    std::cout << '\n';
  }
  std::cout << "summary: " << (std::filesystem::path(out_dir) / "summary.jsonl").string() << '\n';
  return failed == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward relabeling for sparse-reward actor-critic learning"};
  app.require_subcommand(1);

  std::string env_name = "reach2d", out, config_path, checkpoint;
  int count = 200, episodes = 100, parallel = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> sets;
  std::string values;

  auto* gen = app.add_subcommand("gen-demos", "write scripted expert demonstrations");
  gen->add_option("--env", env_name, "environment name")->required();
  gen->add_option("--count", count, "number of episodes")->required();
  gen->add_option("--seed", seed, "generator seed")->required();
  gen->add_option("--out", out, "output file")->required();

  auto* train = app.add_subcommand("train", "run one seed, write metrics and a checkpoint");
  train->add_option("--config", config_path, "key = value config file");
  train->add_option("--seed", seed, "run seed")->required();
  train->add_option("--out", out, "metrics file")->required();
  train->add_option("--set", sets, "override, key=value (repeatable)");

  auto* matrix = app.add_subcommand("matrix", "run variants x seeds");
  matrix->add_option("--config", config_path, "config file with `variants = a, b, ...`")->required();
  matrix->add_option("--out", out, "output directory")->required();
  matrix->add_option("--set", sets, "override, key=value (repeatable)");
  matrix->add_option("--parallel", parallel, "concurrent runs")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep-b", "steps-to-threshold over reward bonus values");
  sweep->add_option("--values", values, "comma-separated b values")->required();
  sweep->add_option("--config", config_path, "config file");
  sweep->add_option("--out", out, "output directory")->required();
  sweep->add_option("--set", sets, "override, key=value (repeatable)");
  sweep->add_option("--parallel", parallel, "concurrent runs")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "evaluation seed");
  eval->add_option("--env", env_name, "override the checkpoint's environment");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const r2::DemoSet demos = r2::envs::generate_demos(env_name, count, seed);
      const auto spec = r2::envs::env_spec(env_name);
      r2::TransitionFileHeader header{env_name, spec.obs_dim, spec.act_dim, spec.R, count,
                                      demos.avg_length, seed};
      r2::write_demo_file(out, demos, header);
      std::cout << "wrote " << demos.episodes.size() << " episodes (N=" << demos.avg_length
                << ") to " << out << '\n';
      return 0;
    }
    if (train->parsed()) {
      r2::RunConfig c;
      r2::apply_key_values(c, load_settings(config_path, sets));
      c.validate();
      print_config(c);
      auto trainer = r2::run_training(c, seed, out, true);
      const auto& recs = trainer->records();
      std::cout << "episodes=" << recs.size() << " env_steps=" << trainer->counters().env_steps
                << " train_steps=" << trainer->counters().train_steps
                << " final_rolling_success=" << (recs.empty() ? 0.0 : recs.back().rolling_success)
                << '\n';
      for (double th : c.thresholds) {
        const auto s = r2::steps_to_threshold(recs, th, c.hold_window);
        std::cout << "steps_to_threshold(" << th << ")=" << (s ? std::to_string(*s) : "none") << '\n';
      }
      return 0;
    }
    if (matrix->parsed()) {
      const auto jobs = r2::matrix_jobs(load_settings(config_path, sets));
      for (const auto& j : jobs) std::cerr << "# job " << j.label << '\n';
      return report(r2::run_matrix(jobs, out, parallel), out);
    }
    if (sweep->parsed()) {
      r2::RunConfig c;
      r2::apply_key_values(c, load_settings(config_path, sets));
      c.validate();
      print_config(c);
      const auto bs = parse_values(values);
      return report(r2::sweep_b(c, bs, out, parallel), out);
    }
    if (eval->parsed()) {
      r2::RunConfig c;
      auto learner = r2::load_checkpoint(checkpoint, c);
      const std::string env = eval->count("--env") ? env_name : c.env;
      const double rate = r2::evaluate(*learner, env, episodes, seed);
      std::cout << "env=" << env << " episodes=" << episodes << " success_rate=" << rate << '\n';
      return 0;
    }
  } catch (const r2::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
