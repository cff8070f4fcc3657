#include "r2/transitions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "r2/error.hpp"

namespace r2 {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* to_string(Origin origin) {
  switch (origin) {
    case Origin::Demo: return "demo";
    case Origin::Agent: return "agent";
    case Origin::Relabeled: return "relabeled";
  }
  return "agent";
}

Origin origin_from_string(const std::string& name) {
  if (name == "demo") return Origin::Demo;
  if (name == "agent") return Origin::Agent;
  if (name == "relabeled") return Origin::Relabeled;
  throw InputError("unknown transition origin '" + name + "'");
}

int average_length(std::span<const Episode> episodes) {
  if (episodes.empty()) return 0;
  double total = 0.0;
  for (const auto& e : episodes) total += static_cast<double>(e.length());
  return static_cast<int>(std::lround(total / static_cast<double>(episodes.size())));
}

std::vector<Transition> ingest_demonstration(const Episode& demo, double R, double b) {
  if (demo.transitions.empty()) throw RejectionError("empty demonstration");
  if (!demo.success) throw RejectionError("demonstration did not solve the task");
  std::vector<Transition> out = demo.transitions;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool last = i + 1 == out.size();
    out[i].origin = Origin::Demo;
    out[i].reward = last ? R : b;
    out[i].done = last;
  }
  return out;
}

Episode relabel_successful_episode(Episode episode, double b, int N) {
  if (!episode.success || episode.transitions.empty()) return episode;
  const std::size_t L = episode.transitions.size();
  const std::size_t window = std::min<std::size_t>(static_cast<std::size_t>(std::max(N - 1, 0)), L - 1);
  for (std::size_t k = L - 1 - window; k < L - 1; ++k) {
    episode.transitions[k].reward = b;
    episode.transitions[k].origin = Origin::Relabeled;
  }
  return episode;
}

std::vector<Episode> group_episodes(std::span<const Transition> transitions) {
  std::vector<Episode> episodes;
  std::map<std::int64_t, std::size_t> slot;
  for (const auto& t : transitions) {
    auto [it, inserted] = slot.try_emplace(t.episode_id, episodes.size());
    if (inserted) episodes.emplace_back();
    episodes[it->second].transitions.push_back(t);
  }
  for (auto& e : episodes) {
    e.success = !e.transitions.empty() && e.transitions.back().done;
  }
  return episodes;
}

namespace {

ordered_json header_json(const TransitionFileHeader& h) {
  ordered_json j;
  j["env_name"] = h.env_name;
  j["obs_dim"] = h.obs_dim;
  j["act_dim"] = h.act_dim;
  j["R"] = h.R;
  j["demo_count"] = h.demo_count;
  j["N"] = h.N;
  j["seed"] = h.seed;
  return j;
}

ordered_json transition_json(const Transition& t) {
  ordered_json j;
  j["episode_id"] = t.episode_id;
  j["step_index"] = t.step_index;
  j["s"] = t.state;
  j["a"] = t.action;
  j["r"] = t.reward;
  j["s2"] = t.next_state;
  j["done"] = t.done;
  j["origin"] = to_string(t.origin);
  return j;
}

Vector vector_field(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw InputError(std::string("field '") + key + "' must be an array");
  Vector out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(x.get<double>());
  return out;
}

}  // namespace

void encode_transitions(std::ostream& out, std::span<const Transition> transitions,
                        const TransitionFileHeader* header) {
  if (header) out << header_json(*header).dump() << '\n';
  for (const auto& t : transitions) out << transition_json(t).dump() << '\n';
}

std::string encode_transitions(std::span<const Transition> transitions,
                               const TransitionFileHeader* header) {
  std::ostringstream os;
  encode_transitions(os, transitions, header);
  return os.str();
}

std::vector<Transition> decode_transitions(std::istream& in,
                                           std::optional<TransitionFileHeader>* header) {
  std::vector<Transition> out;
  if (header) header->reset();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t record = out.size();
    try {
      const json j = json::parse(line);
      if (!j.is_object()) throw InputError("record is not an object");
      if (j.contains("env_name")) {
        if (line_no != 1 || !out.empty()) throw InputError("header must be the first line");
        TransitionFileHeader h;
        h.env_name = j.at("env_name").get<std::string>();
        h.obs_dim = j.at("obs_dim").get<int>();
        h.act_dim = j.at("act_dim").get<int>();
        h.R = j.at("R").get<double>();
        h.demo_count = j.at("demo_count").get<int>();
        h.N = j.at("N").get<int>();
        h.seed = j.at("seed").get<std::uint64_t>();
        if (header) *header = h;
        continue;
      }
      Transition t;
      t.episode_id = j.at("episode_id").get<std::int64_t>();
      t.step_index = j.at("step_index").get<std::int64_t>();
      t.state = vector_field(j, "s");
      t.action = vector_field(j, "a");
      t.reward = j.at("r").get<double>();
      t.next_state = vector_field(j, "s2");
      t.done = j.at("done").get<bool>();
      t.origin = origin_from_string(j.at("origin").get<std::string>());
      if (t.step_index < 0) throw InputError("negative step_index");
      out.push_back(std::move(t));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + " (record " + std::to_string(record) +
                           "): " + e.what(),
                       line_no, record);
    }
  }
  return out;
}

std::vector<Transition> decode_transitions(const std::string& text,
                                           std::optional<TransitionFileHeader>* header) {
  std::istringstream is(text);
  return decode_transitions(is, header);
}

void write_demo_file(const std::string& path, const DemoSet& demos,
                     const TransitionFileHeader& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  std::vector<Transition> flat;
  for (const auto& e : demos.episodes) flat.insert(flat.end(), e.transitions.begin(), e.transitions.end());
  encode_transitions(out, flat, &header);
}

DemoSet read_demo_file(const std::string& path, TransitionFileHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::optional<TransitionFileHeader> h;
  const auto flat = decode_transitions(in, &h);
  DemoSet demos;
  demos.episodes = group_episodes(flat);
  for (const auto& e : demos.episodes) {
    if (!e.success) throw RejectionError("demo file contains an unsuccessful episode");
  }
  demos.avg_length = average_length(demos.episodes);
  if (h) {
    demos.source_seed = h->seed;
    if (header) *header = *h;
  }
  return demos;
}

}  // namespace r2
