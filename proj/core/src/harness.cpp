#include "r2/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "r2/error.hpp"
#include "r2/seed.hpp"

namespace r2 {

using ordered_json = nlohmann::ordered_json;

namespace {

enum StreamTag : std::uint64_t {
  kLearnerInit = 1,
  kEpisodeReset,
  kActNoise,
  kBatchSample,
  kUpdateNoise,
  kDemoReset,
  kWarmup,
  kBcSample,
  kEval,
  kTopUp,
};

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

PerConfig per_config(const RunConfig& c) {
  PerConfig p;
  p.alpha = c.agent.per_alpha;
  p.beta = c.agent.per_beta;
  p.epsilon = c.agent.per_epsilon;
  p.demo_boost = c.agent.use_demo_boost ? c.agent.demo_boost : 0.0;
  return p;
}

// Forwards to an ExpertDemoSource and reports every episode it hands out.
class RecordingSource : public DemoSource {
 public:
  RecordingSource(DemoSource& inner, std::function<void(const Episode&)> sink)
      : inner_(inner), sink_(std::move(sink)) {}
  std::optional<Episode> next() override {
    auto e = inner_.next();
    if (e) sink_(*e);
    return e;
  }

 private:
  DemoSource& inner_;
  std::function<void(const Episode&)> sink_;
};

}  // namespace

Trainer::Trainer(RunConfig config, std::uint64_t seed)
    : config_((config.validate(), std::move(config))),
      seed_(seed),
      env_(envs::make_env(config_.env)),
      buffer_(static_cast<std::size_t>(config_.buffer_capacity), per_config(config_)) {
  const auto& spec = env_.spec();
  learner_ = make_learner(spec.obs_dim, spec.action_low, spec.action_high, config_.agent,
                          stream(kLearnerInit, 0));
}

std::uint64_t Trainer::stream(std::uint64_t tag, std::uint64_t index) const {
  return mix_seed(mix_seed(seed_, tag), index);
}

void Trainer::push_item(ReplayItem item) {
  if (on_push) on_push(item);
  buffer_.push(std::move(item));
}

void Trainer::ingest_demo_episode(const Episode& raw) {
  demo_episodes_.push_back(raw);
  Episode ingested = raw;
  ingested.transitions = ingest_demonstration(raw, config_.agent.R, demo_b_);
  auto slices = assemble_n_step(ingested, config_.agent.n, config_.agent.gamma);
  for (std::size_t i = 0; i < slices.size(); ++i) {
    ReplayItem item{ingested.transitions[i], std::move(slices[i])};
    if (demo_store_) demo_store_->push(item);
    if (config_.demos_in_buffer) push_item(std::move(item));
  }
}

void Trainer::prepare() {
  if (prepared_) return;
  start_time_ = now_seconds();
  const auto& a = config_.agent;
  DemoSet initial;
  if (!config_.demo_file.empty()) {
    initial = read_demo_file(config_.demo_file);
    if (config_.demo_count > 0 && initial.episodes.size() > static_cast<std::size_t>(config_.demo_count)) {
      initial.episodes.resize(static_cast<std::size_t>(config_.demo_count));
    }
    initial.avg_length = average_length(initial.episodes);
  } else if (config_.demo_count > 0) {
    initial = envs::generate_demos(config_.env, config_.demo_count, config_.demo_seed);
  }
  if (a.N > 0) {
    N_ = a.N;
  } else if (initial.avg_length > 0) {
    N_ = initial.avg_length;
  } else {
    // No demonstrations: size the window from a probe set of expert runs.
    N_ = envs::generate_demos(config_.env, 100, mix_seed(config_.demo_seed, 99)).avg_length;
  }
  demo_b_ = a.use_r2 ? a.b : 0.0;
  const bool have_demos = !initial.episodes.empty();
  if (a.use_bc && have_demos) {
    demo_store_ = std::make_unique<ReplayBuffer>(static_cast<std::size_t>(config_.buffer_capacity),
                                                 PerConfig{});
  }
  if (have_demos && config_.demo_topup && config_.demo_ratio_target > 0.0) {
    demo_source_ = std::make_unique<envs::ExpertDemoSource>(
        config_.env, mix_seed(mix_seed(config_.demo_seed, seed_), kTopUp));
  }
  for (const auto& e : initial.episodes) {
    ingest_demo_episode(e);
    ++counters_.demo_episodes_initial;
  }

  // Uniform random interactions alongside the demonstrations.
  std::mt19937_64 rng(stream(kWarmup, 0));
  const auto& spec = env_.spec();
  long warm = 0;
  for (std::int64_t ep_id = 0; warm < config_.random_warmup; ++ep_id) {
    Vector obs = env_.reset(stream(kWarmup, 1 + static_cast<std::uint64_t>(ep_id)));
    Episode ep;
    while (!env_.finished() && warm < config_.random_warmup) {
      Vector act(spec.act_dim);
      for (int k = 0; k < spec.act_dim; ++k) {
        act[k] = std::uniform_real_distribution<double>(spec.action_low[k], spec.action_high[k])(rng);
      }
      auto r = env_.step(act);
      ep.transitions.push_back({obs, act, r.reward, r.observation, r.done, Origin::Agent,
                                -1000000 - ep_id, static_cast<std::int64_t>(ep.length())});
      obs = std::move(r.observation);
      ep.success = r.success;
      ep.timed_out = r.timed_out;
      ++warm;
    }
    if (a.use_r2 && a.relabel_online && ep.success) ep = relabel_successful_episode(ep, a.b, N_);
    auto slices = assemble_n_step(ep, a.n, a.gamma);
    for (std::size_t i = 0; i < slices.size(); ++i) {
      push_item({ep.transitions[i], std::move(slices[i])});
    }
  }
  counters_.warmup_steps = warm;
  prepared_ = true;
}

double Trainer::current_beta() const {
  const auto& a = config_.agent;
  const double planned =
      static_cast<double>(config_.pretrain_iters) +
      std::ceil(static_cast<double>(config_.total_env_steps) / config_.env_steps_per_update());
  const double progress = planned > 0 ? std::min(1.0, static_cast<double>(total_updates_) / planned) : 1.0;
  return a.per_beta + (a.per_beta_final - a.per_beta) * progress;
}

void Trainer::update_step() {
  const auto& a = config_.agent;
  const auto step = static_cast<std::uint64_t>(total_updates_);
  buffer_.set_beta(current_beta());
  const SampledBatch sb =
      buffer_.sample_prioritized(static_cast<std::size_t>(a.batch_size), stream(kBatchSample, step));
  const TransitionBatch batch = TransitionBatch::from_replay(buffer_, sb.indices, a.gamma, false);
  const std::uint64_t noise = stream(kUpdateNoise, step);

  const Eigen::VectorXd y = learner_->targets(batch, mix_seed(noise, 0));
  const CriticUpdateResult cr = learner_->critic_update(batch, y, sb.weights, a.l2_critic);
  if (a.use_nstep) {
    const TransitionBatch slices = TransitionBatch::from_replay(buffer_, sb.indices, a.gamma, true);
    learner_->nstep_critic_update(slices, sb.weights, a.l2_critic, mix_seed(noise, 1));
  }
  learner_->actor_update(batch.states, a.l2_actor, mix_seed(noise, 2));
  if (a.use_bc && demo_store_ && demo_store_->size() > 0) {
    const auto idx = demo_store_->sample_uniform(static_cast<std::size_t>(a.bc_batch_size),
                                                 stream(kBcSample, step));
    learner_->bc_update(TransitionBatch::from_replay(*demo_store_, idx, a.gamma, false), a.lambda_bc);
  }
  learner_->soft_update_targets(a.tau);

  std::vector<double> td(cr.td_errors.data(), cr.td_errors.data() + cr.td_errors.size());
  buffer_.update_priorities(sb.indices, td);
  ++total_updates_;
}

void Trainer::pretrain(int iters) {
  if (!prepared_) prepare();
  for (int i = 0; i < iters; ++i) {
    update_step();
    ++counters_.pretrain_updates;
  }
}

Episode Trainer::collect_episode() {
  if (!prepared_) prepare();
  const auto& a = config_.agent;
  const auto ep_idx = static_cast<std::uint64_t>(counters_.episodes);
  Vector obs;
  bool from_demo = false;
  if (a.use_demo_resets && !demo_episodes_.empty()) {
    std::mt19937_64 rng(stream(kDemoReset, ep_idx));
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < a.bc_reset_fraction) {
      const auto& demo = demo_episodes_[std::uniform_int_distribution<std::size_t>(
          0, demo_episodes_.size() - 1)(rng)];
      const auto& t = demo.transitions[std::uniform_int_distribution<std::size_t>(
          0, demo.length() - 1)(rng)];
      obs = env_.set_state(envs::state_from_observation(env_.spec(), t.state));
      from_demo = true;
    }
  }
  if (!from_demo) obs = env_.reset(stream(kEpisodeReset, ep_idx));

  Episode ep;
  double ret = 0.0;
  while (!env_.finished()) {
    const auto k = static_cast<std::uint64_t>(counters_.env_steps + counters_.warmup_steps) +
                   ep.length();
    Vector act = learner_->act(obs, ActMode::Explore, stream(kActNoise, k));
    auto r = env_.step(act);
    ret += r.reward;
    ep.transitions.push_back({obs, std::move(act), r.reward, r.observation, r.done, Origin::Agent,
                              static_cast<std::int64_t>(ep_idx),
                              static_cast<std::int64_t>(ep.length())});
    obs = std::move(r.observation);
    ep.success = r.success;
    ep.timed_out = r.timed_out;
  }
  counters_.env_steps += static_cast<long>(ep.length());
  ++counters_.episodes;

  const int window = config_.rolling_window;
  success_window_.push_back(ep.success ? 1 : 0);
  success_window_sum_ += ep.success ? 1 : 0;
  if (static_cast<int>(success_window_.size()) > window) {
    success_window_sum_ -= success_window_.front();
    success_window_.pop_front();
  }
  MetricsRecord rec;
  rec.env_step = counters_.env_steps;
  rec.train_step = counters_.train_steps;
  rec.episode_index = static_cast<long>(ep_idx);
  rec.episode_return = ret;
  rec.episode_success = ep.success ? 1 : 0;
  rec.episode_length = static_cast<int>(ep.length());
  rec.rolling_success =
      static_cast<double>(success_window_sum_) / static_cast<double>(success_window_.size());
  rec.wall_time = config_.record_wall_time ? now_seconds() - start_time_ : 0.0;
  records_.push_back(rec);

  if (a.use_r2 && a.relabel_online && ep.success) {
    ep = relabel_successful_episode(std::move(ep), a.b, N_);
    ++counters_.relabeled_episodes;
  }
  if (config_.eval_every > 0 && (ep_idx + 1) % static_cast<std::uint64_t>(config_.eval_every) == 0) {
    evals_.push_back({rec.episode_index, rec.env_step,
                      evaluate_greedy(config_.eval_episodes, stream(kEval, ep_idx))});
  }
  if (keep_episodes) episodes_log_.push_back(ep);
  return ep;
}

double Trainer::evaluate_greedy(int episodes, std::uint64_t seed) {
  return evaluate(*learner_, config_.env, episodes, seed);
}

void Trainer::top_up(std::size_t last_episode_length) {
  if (!demo_source_) return;
  const auto& a = config_.agent;
  const double target = config_.demo_ratio_target;
  ++counters_.boundaries;
  auto record = [this](const Episode& e) {
    ++counters_.demo_episodes_added;
    counters_.demo_transitions_added += static_cast<long>(e.length());
  };
  if (config_.demos_in_buffer) {
    const double before = buffer_.demo_ratio();
    const double slack = static_cast<double>(last_episode_length) / static_cast<double>(buffer_.size());
    counters_.min_boundary_margin = std::min(counters_.min_boundary_margin, before - (target - slack));
    RecordingSource source(*demo_source_, [&](const Episode& e) {
      record(e);
      demo_episodes_.push_back(e);
      if (demo_store_) {
        Episode ingested = e;
        ingested.transitions = ingest_demonstration(e, a.R, demo_b_);
        demo_store_->push_episode(ingested, a.n, a.gamma);
      }
    });
    const TopUpResult r = demo_ratio_top_up(buffer_, source, {target, a.R, demo_b_, a.n, a.gamma});
    counters_.demo_source_exhausted |= r.exhausted;
    counters_.min_ratio_after_topup = std::min(counters_.min_ratio_after_topup, buffer_.demo_ratio());
    return;
  }
  if (!demo_store_) return;
  // Separate demo store: keep it at the target share of all stored data.
  auto share = [&] {
    const double d = static_cast<double>(demo_store_->size());
    return d / (d + static_cast<double>(buffer_.size()));
  };
  while (share() < target) {
    auto e = demo_source_->next();
    if (!e) {
      counters_.demo_source_exhausted = true;
      break;
    }
    record(*e);
    ingest_demo_episode(*e);
  }
  counters_.min_ratio_after_topup = std::min(counters_.min_ratio_after_topup, share());
}

void Trainer::run() {
  prepare();
  pretrain(config_.pretrain_iters);
  const int per_update = config_.env_steps_per_update();
  const long batch = config_.agent.batch_size;
  std::size_t last_length = 0;
  while (true) {
    if (pending_.empty() && counters_.env_steps >= config_.total_env_steps) break;
    update_step();
    ++counters_.train_steps;
    counters_.replayed_samples += batch;
    for (int k = 0; k < per_update; ++k) {
      if (pending_.empty()) {
        if (counters_.env_steps >= config_.total_env_steps) break;
        if (counters_.episodes > 0) top_up(last_length);
        Episode ep = collect_episode();
        last_length = ep.length();
        auto slices = assemble_n_step(ep, config_.agent.n, config_.agent.gamma);
        for (std::size_t i = 0; i < slices.size(); ++i) {
          pending_.push_back({std::move(ep.transitions[i]), std::move(slices[i])});
        }
      }
      push_item(std::move(pending_.front()));
      pending_.pop_front();
    }
  }
}

std::unique_ptr<Trainer> run_training(const RunConfig& config, std::uint64_t seed,
                                      const std::string& metrics_path, bool checkpoint) {
  auto trainer = std::make_unique<Trainer>(config, seed);
  trainer->run();
  if (!metrics_path.empty()) {
    write_metrics_file(metrics_path, trainer->config(), seed, trainer->relabel_window(),
                       trainer->records());
    if (!trainer->evals().empty()) {
      std::ofstream ev(metrics_path + ".eval.jsonl");
      for (const auto& e : trainer->evals()) {
        ordered_json j;
        j["episode_index"] = e.episode_index;
        j["env_step"] = e.env_step;
        j["success_rate"] = e.success_rate;
        ev << j.dump() << '\n';
      }
    }
    if (checkpoint) save_checkpoint(metrics_path + ".ckpt", trainer->config(), trainer->learner());
  }
  return trainer;
}

// ---- metrics ------------------------------------------------------------------

void write_metrics(std::ostream& out, const RunConfig& config, std::uint64_t seed, int N,
                   std::span<const MetricsRecord> records) {
  ordered_json header;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : config_echo(config)) cfg[k] = v;
  header["config"] = cfg;
  header["seed"] = seed;
  header["N"] = N;
  out << header.dump() << '\n';
  for (const auto& r : records) {
    ordered_json j;
    j["env_step"] = r.env_step;
    j["train_step"] = r.train_step;
    j["episode_index"] = r.episode_index;
    j["episode_return"] = r.episode_return;
    j["episode_success"] = r.episode_success;
    j["episode_length"] = r.episode_length;
    j["rolling_success"] = r.rolling_success;
    j["wall_time"] = r.wall_time;
    out << j.dump() << '\n';
  }
}

void write_metrics_file(const std::string& path, const RunConfig& config, std::uint64_t seed,
                        int N, std::span<const MetricsRecord> records) {
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_metrics(out, config, seed, N, records);
}

std::vector<MetricsRecord> read_metrics_file(const std::string& path, KeyValues* echo) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      if (j.contains("config")) {
        if (echo) {
          echo->clear();
          for (const auto& [k, v] : j.at("config").items()) echo->emplace_back(k, v.get<std::string>());
        }
        continue;
      }
      MetricsRecord r;
      r.env_step = j.at("env_step").get<long>();
      r.train_step = j.at("train_step").get<long>();
      r.episode_index = j.at("episode_index").get<long>();
      r.episode_return = j.at("episode_return").get<double>();
      r.episode_success = j.at("episode_success").get<int>();
      r.episode_length = j.at("episode_length").get<int>();
      r.rolling_success = j.at("rolling_success").get<double>();
      r.wall_time = j.at("wall_time").get<double>();
      out.push_back(r);
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no, out.size());
    }
  }
  return out;
}

// ---- statistics -------------------------------------------------------------

std::vector<double> rolling_success(std::span<const int> successes, int window) {
  if (window < 1) throw InputError("rolling window must be >= 1");
  std::vector<double> out(successes.size());
  long sum = 0;
  for (std::size_t i = 0; i < successes.size(); ++i) {
    sum += successes[i];
    if (i >= static_cast<std::size_t>(window)) sum -= successes[i - static_cast<std::size_t>(window)];
    const std::size_t n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = static_cast<double>(sum) / static_cast<double>(n);
  }
  return out;
}

std::optional<std::size_t> threshold_crossing(std::span<const double> rolling, double threshold,
                                              int hold_window) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw InputError("threshold must lie in (0, 1]");
  if (hold_window < 1) throw InputError("hold window must be >= 1");
  int run = 0;
  for (std::size_t i = 0; i < rolling.size(); ++i) {
    run = rolling[i] >= threshold ? run + 1 : 0;
    if (run == hold_window) return i;
  }
  return std::nullopt;
}

namespace {

std::optional<std::size_t> crossing_index(std::span<const MetricsRecord> records, double threshold,
                                          int hold_window) {
  std::vector<double> rolling;
  rolling.reserve(records.size());
  for (const auto& r : records) rolling.push_back(r.rolling_success);
  return threshold_crossing(rolling, threshold, hold_window);
}

}  // namespace

std::optional<long> steps_to_threshold(std::span<const MetricsRecord> records, double threshold,
                                       int hold_window) {
  const auto i = crossing_index(records, threshold, hold_window);
  if (!i) return std::nullopt;
  return records[*i].train_step;
}

std::optional<long> env_steps_to_threshold(std::span<const MetricsRecord> records,
                                           double threshold, int hold_window) {
  const auto i = crossing_index(records, threshold, hold_window);
  if (!i) return std::nullopt;
  return records[*i].env_step;
}

// ---- matrix -------------------------------------------------------------------

std::vector<MatrixJob> matrix_jobs(const KeyValues& kv) {
  std::vector<std::string> variants;
  for (const auto& [k, v] : kv) {
    if (k == "variants") {
      std::istringstream is(v);
      std::string item;
      while (std::getline(is, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) variants.push_back(item);
      }
    }
  }
  if (variants.empty()) {
    RunConfig c;
    apply_key_values(c, kv);
    return {{c.variant, c}};
  }
  std::vector<MatrixJob> jobs;
  for (const auto& label : variants) {
    RunConfig c;
    apply_variant(c, label);
    for (const auto& [k, v] : kv) {
      if (k == "variant" || k == "variants" || k.find('.') != std::string::npos) continue;
      apply_key(c, k, v);
    }
    const std::string prefix = label + ".";
    for (const auto& [k, v] : kv) {
      if (k.starts_with(prefix)) apply_key(c, k.substr(prefix.size()), v);
    }
    c.validate();
    jobs.push_back({label, c});
  }
  return jobs;
}

namespace {

ordered_json opt_json(const std::optional<long>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

void write_summary(const std::string& path, const std::vector<MatrixJob>& jobs,
                   const std::vector<RunSummary>& runs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  for (const auto& job : jobs) {
    ordered_json j;
    j["kind"] = "config";
    j["label"] = job.label;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : config_echo(job.config)) cfg[k] = v;
    j["config"] = cfg;
    out << j.dump() << '\n';
  }
  for (const auto& r : runs) {
    const RunConfig* cfg = nullptr;
    for (const auto& j : jobs) {
      if (j.label == r.label) cfg = &j.config;
    }
    for (std::size_t t = 0; cfg && t < cfg->thresholds.size(); ++t) {
      ordered_json j;
      j["kind"] = "run";
      j["label"] = r.label;
      j["seed"] = r.seed;
      j["b"] = r.b;
      j["ok"] = r.ok;
      if (!r.ok) j["error"] = r.error;
      j["metrics"] = r.metrics_path;
      j["threshold"] = cfg->thresholds[t];
      j["train_steps"] = r.ok ? opt_json(r.train_steps_to_threshold[t]) : ordered_json(nullptr);
      j["env_steps"] = r.ok ? opt_json(r.env_steps_to_threshold[t]) : ordered_json(nullptr);
      j["final_rolling_success"] = r.final_rolling_success;
      j["total_env_steps"] = r.counters.env_steps;
      j["total_train_steps"] = r.counters.train_steps;
      out << j.dump() << '\n';
    }
  }
  for (const auto& job : jobs) {
    for (std::size_t t = 0; t < job.config.thresholds.size(); ++t) {
      std::vector<double> steps;
      int count = 0;
      double final_sum = 0.0;
      for (const auto& r : runs) {
        if (r.label != job.label || !r.ok) continue;
        ++count;
        final_sum += r.final_rolling_success;
        if (r.train_steps_to_threshold[t]) steps.push_back(static_cast<double>(*r.train_steps_to_threshold[t]));
      }
      ordered_json j;
      j["kind"] = "aggregate";
      j["label"] = job.label;
      j["b"] = job.config.agent.b;
      j["threshold"] = job.config.thresholds[t];
      j["runs"] = count;
      j["crossed"] = steps.size();
      if (steps.empty()) {
        j["median_train_steps"] = nullptr;
        j["mean_train_steps"] = nullptr;
        j["se_train_steps"] = nullptr;
      } else {
        std::sort(steps.begin(), steps.end());
        const std::size_t n = steps.size();
        const double median = n % 2 ? steps[n / 2] : 0.5 * (steps[n / 2 - 1] + steps[n / 2]);
        const double mean = std::accumulate(steps.begin(), steps.end(), 0.0) / static_cast<double>(n);
        double var = 0.0;
        for (double s : steps) var += (s - mean) * (s - mean);
        const double se = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n)) : 0.0;
        j["median_train_steps"] = median;
        j["mean_train_steps"] = mean;
        j["se_train_steps"] = se;
      }
      j["mean_final_rolling_success"] = count ? final_sum / count : 0.0;
      out << j.dump() << '\n';
    }
  }
}

}  // namespace

std::vector<RunSummary> run_matrix(const std::vector<MatrixJob>& jobs, const std::string& out_dir,
                                   int parallel) {
  std::filesystem::create_directories(out_dir);
  struct Task {
    const MatrixJob* job;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& j : jobs) {
    for (auto s : j.config.seeds) tasks.push_back({&j, s});
  }
  std::vector<RunSummary> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& t = tasks[i];
      RunSummary& s = results[i];
      s.label = t.job->label;
      s.seed = t.seed;
      s.b = t.job->config.agent.b;
      s.metrics_path =
          (std::filesystem::path(out_dir) / (t.job->label + "_seed" + std::to_string(t.seed) + ".jsonl")).string();
      try {
        auto trainer = run_training(t.job->config, t.seed, s.metrics_path);
        const auto& recs = trainer->records();
        s.counters = trainer->counters();
        s.final_rolling_success = recs.empty() ? 0.0 : recs.back().rolling_success;
        for (double th : t.job->config.thresholds) {
          s.train_steps_to_threshold.push_back(steps_to_threshold(recs, th, t.job->config.hold_window));
          s.env_steps_to_threshold.push_back(env_steps_to_threshold(recs, th, t.job->config.hold_window));
        }
        s.ok = true;
      } catch (const std::exception& e) {
        s.ok = false;
        s.error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallel, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int k = 1; k < n; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  write_summary((std::filesystem::path(out_dir) / "summary.jsonl").string(), jobs, results);
  return results;
}

std::vector<RunSummary> sweep_b(const RunConfig& base, std::span<const double> values,
                                const std::string& out_dir, int parallel) {
  std::vector<MatrixJob> jobs;
  for (double b : values) {
    RunConfig c = base;
    c.agent.b = b;
    std::ostringstream label;
    label << "b" << b;
    jobs.push_back({label.str(), c});
  }
  return run_matrix(jobs, out_dir, parallel);
}

// ---- checkpoints ----------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'R', '2', 'C', 'K', 'P', 'T', '1', '\n'};

void put_string(std::ostream& out, const std::string& s) {
  const std::uint64_t n = s.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(s.data(), static_cast<std::streamsize>(n));
}

std::string get_string(std::istream& in) {
  std::uint64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n) || n > (1u << 26)) {
    throw ParseError("checkpoint: bad string length", 0, 0);
  }
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint truncated", 0, 0);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config, Learner& learner) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_string(out, config_to_text(config));
  const auto sets = learner.parameter_sets();
  const std::uint64_t count = sets.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto& s : sets) {
    put_string(out, s.name);
    net::write_checkpoint(out, s.shape, *s.params);
  }
}

std::unique_ptr<Learner> load_checkpoint(const std::string& path, RunConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  char magic[sizeof kCheckpointMagic];
  if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kCheckpointMagic)) {
    throw ParseError("not an r2 checkpoint: " + path, 0, 0);
  }
  RunConfig c;
  apply_key_values(c, parse_key_values(get_string(in)));
  const auto spec = envs::env_spec(c.env);
  auto learner = make_learner(spec.obs_dim, spec.action_low, spec.action_high, c.agent, 0);
  std::uint64_t count = 0;
  if (!in.read(reinterpret_cast<char*>(&count), sizeof count)) throw ParseError("checkpoint truncated", 0, 0);
  auto sets = learner->parameter_sets();
  if (count != sets.size()) throw ParseError("checkpoint: parameter set count mismatch", 0, 0);
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::string name = get_string(in);
    net::MlpShape shape;
    net::ParamSet params;
    net::read_checkpoint(in, shape, params);
    auto it = std::find_if(sets.begin(), sets.end(), [&](const NamedParams& p) { return p.name == name; });
    if (it == sets.end() || !(it->shape == shape)) {
      throw ParseError("checkpoint: unexpected parameter set '" + name + "'", 0, 0);
    }
    *it->params = std::move(params);
  }
  config = std::move(c);
  return learner;
}

double evaluate(const Learner& learner, const std::string& env_name, int episodes,
                std::uint64_t seed) {
  if (episodes < 1) throw InputError("evaluation needs at least one episode");
  envs::Env env = envs::make_env(env_name);
  int wins = 0;
  for (int e = 0; e < episodes; ++e) {
    Vector obs = env.reset(mix_seed(seed, static_cast<std::uint64_t>(e)));
    bool success = false;
    while (!env.finished()) {
      auto r = env.step(learner.act(obs, ActMode::Exploit, 0));
      success = r.success;
      obs = std::move(r.observation);
    }
    wins += success ? 1 : 0;
  }
  return static_cast<double>(wins) / episodes;
}

}  // namespace r2
