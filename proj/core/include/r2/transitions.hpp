#pragma once

// Transition / episode data model, demonstration ingestion with the reward
// bonus, and relabeling of successful episodes.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace r2 {

using Vector = std::vector<double>;

enum class Origin : std::uint8_t { Demo, Agent, Relabeled };

const char* to_string(Origin origin);
Origin origin_from_string(const std::string& name);

struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
  bool done = false;  // true only on task success, never on timeout
  Origin origin = Origin::Agent;
  std::int64_t episode_id = 0;
  std::int64_t step_index = 0;

  bool operator==(const Transition&) const = default;
};

struct Episode {
  std::vector<Transition> transitions;
  bool success = false;
  bool timed_out = false;

  std::size_t length() const { return transitions.size(); }
  bool operator==(const Episode&) const = default;
};

struct DemoSet {
  std::vector<Episode> episodes;
  int avg_length = 0;  // N: rounded mean episode length
  std::uint64_t source_seed = 0;
};

// Rounded arithmetic mean of episode lengths; 0 for an empty span.
int average_length(std::span<const Episode> episodes);

// Demo rewards become [b, b, ..., R]; the final transition is marked done.
// Throws RejectionError for empty or unsuccessful demos.
std::vector<Transition> ingest_demonstration(const Episode& demo, double R, double b);

// On a successful episode, assigns reward b (origin Relabeled) to the last
// min(N-1, L-1) non-final transitions. Failed episodes are returned as is.
Episode relabel_successful_episode(Episode episode, double b, int N);

// Regroups a flat transition list into episodes by episode_id, in order of
// first appearance. success follows the final transition's done flag.
std::vector<Episode> group_episodes(std::span<const Transition> transitions);

// ---- Line-delimited transition files ---------------------------------------

struct TransitionFileHeader {
  std::string env_name;
  int obs_dim = 0;
  int act_dim = 0;
  double R = 0.0;
  int demo_count = 0;
  int N = 0;
  std::uint64_t seed = 0;

  bool operator==(const TransitionFileHeader&) const = default;
};

// One JSON object per line. Floats are written in shortest round-trip form,
// so decode(encode(x)) == x bit for bit.
void encode_transitions(std::ostream& out, std::span<const Transition> transitions,
                        const TransitionFileHeader* header = nullptr);
std::string encode_transitions(std::span<const Transition> transitions,
                               const TransitionFileHeader* header = nullptr);

// Throws ParseError carrying the line number and record index on malformed
// input. A leading header line is optional; it is returned through `header`.
std::vector<Transition> decode_transitions(std::istream& in,
                                           std::optional<TransitionFileHeader>* header = nullptr);
std::vector<Transition> decode_transitions(const std::string& text,
                                           std::optional<TransitionFileHeader>* header = nullptr);

void write_demo_file(const std::string& path, const DemoSet& demos,
                     const TransitionFileHeader& header);
DemoSet read_demo_file(const std::string& path, TransitionFileHeader* header = nullptr);

}  // namespace r2
