#pragma once

// Training loop (interleaved update / drain / collect), pretraining,
// experiment matrix, metrics I/O and the learning-curve statistics.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "r2/agents.hpp"
#include "r2/config.hpp"
#include "r2/envs.hpp"
#include "r2/replay.hpp"

namespace r2 {

struct MetricsRecord {
  long env_step = 0;
  long train_step = 0;
  long episode_index = 0;
  double episode_return = 0.0;
  int episode_success = 0;
  int episode_length = 0;
  double rolling_success = 0.0;
  double wall_time = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

struct RunCounters {
  long env_steps = 0;         // agent interactions after pretraining
  long warmup_steps = 0;      // random interactions before pretraining
  long train_steps = 0;       // updates after pretraining
  long pretrain_updates = 0;
  long replayed_samples = 0;  // batch_size * train_steps
  long episodes = 0;
  long relabeled_episodes = 0;
  long demo_episodes_initial = 0;
  long demo_episodes_added = 0;
  long demo_transitions_added = 0;
  bool demo_source_exhausted = false;
  long boundaries = 0;
  // Smallest demo ratio right after a top-up, and smallest
  // ratio - (target - last_episode_length / buffer_size) before it.
  double min_ratio_after_topup = 1.0;
  double min_boundary_margin = 1.0;
};

struct EvalRecord {
  long episode_index = 0;
  long env_step = 0;
  double success_rate = 0.0;
};

class Trainer {
 public:
  Trainer(RunConfig config, std::uint64_t seed);

  // Demos, warmup interactions; no gradient updates.
  void prepare();

  // `iters` full update steps with no environment interaction. Throws
  // NotReadyError when the buffer holds fewer than batch_size items.
  void pretrain(int iters);

  // One gradient update: critic, optional n-step, actor, optional BC,
  // target smoothing, priority refresh.
  void update_step();

  // Runs one episode with the exploring policy and returns it, relabeled
  // when R2 is active; also appends its metrics record.
  Episode collect_episode();

  // Full protocol: prepare, pretrain, then interleave updates with draining
  // env_steps_per_update() transitions per update until total_env_steps.
  void run();

  const RunConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  int relabel_window() const { return N_; }
  const RunCounters& counters() const { return counters_; }
  const std::vector<MetricsRecord>& records() const { return records_; }
  const std::vector<EvalRecord>& evals() const { return evals_; }
  Learner& learner() { return *learner_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const ReplayBuffer* demo_store() const { return demo_store_.get(); }
  const std::vector<Episode>& collected_episodes() const { return episodes_log_; }

  // Called with every item right before it enters the main buffer.
  std::function<void(const ReplayItem&)> on_push;
  // Keep every collected (post-relabel) episode in collected_episodes().
  bool keep_episodes = false;

 private:
  void push_item(ReplayItem item);
  void ingest_demo_episode(const Episode& raw);
  void top_up(std::size_t last_episode_length);
  double current_beta() const;
  std::uint64_t stream(std::uint64_t tag, std::uint64_t index) const;
  double evaluate_greedy(int episodes, std::uint64_t seed);

  RunConfig config_;
  std::uint64_t seed_;
  envs::Env env_;
  std::unique_ptr<Learner> learner_;
  ReplayBuffer buffer_;
  std::unique_ptr<ReplayBuffer> demo_store_;
  std::unique_ptr<envs::ExpertDemoSource> demo_source_;
  std::vector<Episode> demo_episodes_;  // raw expert episodes, for demo resets
  std::deque<ReplayItem> pending_;
  std::vector<MetricsRecord> records_;
  std::vector<EvalRecord> evals_;
  std::vector<Episode> episodes_log_;
  RunCounters counters_;
  double demo_b_ = 0.0;
  int N_ = 1;
  long total_updates_ = 0;
  long success_window_sum_ = 0;
  std::deque<int> success_window_;
  double start_time_ = 0.0;
  bool prepared_ = false;
};

// Runs one seed and writes the metrics file (and a `.ckpt` checkpoint next
// to it when `checkpoint` is set). Returns the finished trainer.
std::unique_ptr<Trainer> run_training(const RunConfig& config, std::uint64_t seed,
                                      const std::string& metrics_path = "",
                                      bool checkpoint = false);

// ---- metrics files ---------------------------------------------------------

// Header line {"config": {...}, "seed": s, "N": n} then one record per line.
void write_metrics(std::ostream& out, const RunConfig& config, std::uint64_t seed, int N,
                   std::span<const MetricsRecord> records);
void write_metrics_file(const std::string& path, const RunConfig& config, std::uint64_t seed,
                        int N, std::span<const MetricsRecord> records);
std::vector<MetricsRecord> read_metrics_file(const std::string& path,
                                             KeyValues* config_echo = nullptr);

// ---- curve statistics ------------------------------------------------------

// Trailing-window mean; the first window-1 entries average what exists.
std::vector<double> rolling_success(std::span<const int> successes, int window);

// Index of the episode that completes the first run of `hold_window`
// consecutive entries with rolling >= threshold.
std::optional<std::size_t> threshold_crossing(std::span<const double> rolling, double threshold,
                                              int hold_window);

// Training step at the crossing episode, or nullopt if never reached.
std::optional<long> steps_to_threshold(std::span<const MetricsRecord> records, double threshold,
                                       int hold_window);
// Same crossing, reported in environment steps.
std::optional<long> env_steps_to_threshold(std::span<const MetricsRecord> records,
                                           double threshold, int hold_window);

// ---- experiment matrix -------------------------------------------------------

struct MatrixJob {
  std::string label;
  RunConfig config;
};

// Builds jobs from a matrix config: base keys, `variants = a, b, ...` and
// optional per-variant overrides `<variant>.<key> = value`.
std::vector<MatrixJob> matrix_jobs(const KeyValues& kv);

struct RunSummary {
  std::string label;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::string metrics_path;
  RunCounters counters;
  double b = 0.0;
  double final_rolling_success = 0.0;
  std::vector<std::optional<long>> train_steps_to_threshold;  // per config threshold
  std::vector<std::optional<long>> env_steps_to_threshold;
};

// Runs every job x seed (up to `parallel` at once), writes one metrics file
// per run plus `summary.jsonl` in out_dir. Failed runs are recorded, not fatal.
std::vector<RunSummary> run_matrix(const std::vector<MatrixJob>& jobs, const std::string& out_dir,
                                   int parallel = 1);

// One job per b value (label b<value>), then run_matrix.
std::vector<RunSummary> sweep_b(const RunConfig& base, std::span<const double> values,
                                const std::string& out_dir, int parallel = 1);

// ---- checkpoints and evaluation ------------------------------------------------

void save_checkpoint(const std::string& path, const RunConfig& config, Learner& learner);
// Rebuilds the learner recorded in the checkpoint; `config` receives the echo.
std::unique_ptr<Learner> load_checkpoint(const std::string& path, RunConfig& config);

// Greedy (exploit) success rate over `episodes` seeded resets.
double evaluate(const Learner& learner, const std::string& env_name, int episodes,
                std::uint64_t seed);

}  // namespace r2
