#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gensim/agent.hpp"
#include "gensim/llm.hpp"

namespace gensim {

/// Everything outside the agents. `round` counts completed rounds, so it is
/// also the index of the next round to run.
struct EnvironmentState {
  std::uint64_t round = 0;
  std::map<std::string, std::string> globals;
  nlohmann::json scenario_state = nlohmann::json::object();

  nlohmann::json to_json() const;
  static EnvironmentState from_json(const nlohmann::json& j);
};

enum class IssuedBy { api, ui, script };

const char* to_string(IssuedBy by);
IssuedBy issued_by_from_string(std::string_view s);

struct SetGlobal {
  std::string key;
  std::string value;
};

struct Broadcast {
  std::string message;
};

struct Intervention {
  std::uint64_t apply_at_round = 0;
  std::variant<SetGlobal, Broadcast> action;
  IssuedBy issued_by = IssuedBy::api;

  nlohmann::json to_json() const;
  static Intervention from_json(const nlohmann::json& j);
};

/// Append-only from any thread; drained single-threaded at round barriers.
class InterventionQueue {
 public:
  /// Throws ValidationError if apply_at_round < current_round.
  void submit(Intervention intervention, std::uint64_t current_round);
  /// Removes and returns interventions due at or before `round`, in
  /// submission order.
  std::vector<Intervention> take_due(std::uint64_t round);
  /// Puts back interventions taken by an aborted round, ahead of the rest.
  void restore_front(std::vector<Intervention> items);
  std::vector<Intervention> pending() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Intervention> items_;
};

struct InterviewExchange {
  AgentId agent_id;
  std::string question;
  std::string answer;
  std::uint64_t round = 0;

  nlohmann::json to_json() const;
};

class Environment {
 public:
  EnvironmentState& state() noexcept { return state_; }
  const EnvironmentState& state() const noexcept { return state_; }
  InterventionQueue& interventions() noexcept { return queue_; }
  const InterventionQueue& interventions() const noexcept { return queue_; }

  void submit(Intervention intervention) { queue_.submit(std::move(intervention), state_.round); }

  /// Applies interventions due at the current round: globals change at once,
  /// broadcasts become this round's announcements. Returns what was applied.
  std::vector<Intervention> apply_due();
  /// Reverses apply_due for a round that did not complete.
  void undo_apply(std::vector<Intervention> applied, std::map<std::string, std::string> previous_globals);

  const std::vector<std::string>& broadcasts() const noexcept { return broadcasts_; }
  void clear_broadcasts() { broadcasts_.clear(); }

  /// Text an agent sees about the world this round: broadcasts first, then
  /// global facts, then the scenario's own view.
  std::string agent_view(std::string_view scenario_view) const;

  void log_interview(InterviewExchange exchange);
  std::vector<InterviewExchange> interview_log() const;

 private:
  EnvironmentState state_;
  InterventionQueue queue_;
  std::vector<std::string> broadcasts_;
  mutable std::mutex interview_mutex_;
  std::vector<InterviewExchange> interviews_;
};

/// Asks an agent a question without touching its memory or the simulation.
InterviewExchange interview(const Agent& agent, std::string_view question, Backend& backend,
                            std::uint64_t current_round);

/// Profiles whose public values contain `query` (case-insensitive), by id.
std::vector<AgentProfile> search_agents(std::span<const Agent> agents, std::string_view query);

/// Contents of a checkpoint archive: a header line, then named JSON-lines
/// sections in a fixed order.
struct CheckpointData {
  static constexpr int kFormatVersion = 1;

  std::uint64_t round = 0;
  nlohmann::json config;
  std::vector<nlohmann::json> profiles;
  std::vector<nlohmann::json> memories;
  nlohmann::json env;
  nlohmann::json rng;
  std::vector<nlohmann::json> queue;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
/// Throws IoError for missing, empty or malformed archives.
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace gensim
