#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gensim/agent.hpp"
#include "gensim/environment.hpp"
#include "gensim/gateway.hpp"
#include "gensim/rng.hpp"
#include "gensim/scenario.hpp"

namespace gensim {

struct SimulationConfig {
  std::string scenario = "recommender";
  std::size_t num_agents = 10;
  std::uint64_t rounds = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 4;
  MemoryConfig memory;
  BackendConfig backend;
  RetryPolicy retry;
  nlohmann::json scenario_params = nlohmann::json::object();
  std::optional<std::string> population_file;
  std::optional<std::string> event_log;
  /// Events are kept in memory for streaming and export.
  bool keep_events = true;

  /// Throws ConfigError listing every offending field.
  void validate() const;
  nlohmann::json to_json() const;
  /// Collects every field error before throwing ConfigError.
  static SimulationConfig from_json(const nlohmann::json& j);
  static SimulationConfig load(const std::filesystem::path& path);
};

struct ActionEvent {
  std::uint64_t seq = 0;
  std::uint64_t round = 0;
  AgentId agent_id;
  std::string q;
  std::string a;
  nlohmann::json parsed;
  double latency_ms = 0.0;
  std::optional<std::string> error;

  /// Fields in fixed order: seq, round, agent_id, q, a, parsed, latency_ms[, error].
  nlohmann::ordered_json to_json() const;
  std::string to_json_line() const;
  static ActionEvent from_json(const nlohmann::json& j);
};

struct RoundReport {
  std::uint64_t round = 0;
  std::size_t events = 0;
  Millis wall_time{0};
  std::size_t errors = 0;
  std::size_t tasks = 0;
  std::size_t reflections = 0;
  bool aborted = false;
  std::optional<std::string> abort_reason;

  nlohmann::json to_json() const;
};

/// Append-only log of action events with monotone seq numbers. Each round's
/// events are written to the file (if any) and flushed together. Readers can
/// block until events past a given seq arrive.
class EventLog {
 public:
  /// `next_seq` continues numbering after a restore; `append` keeps existing
  /// file contents.
  explicit EventLog(std::optional<std::filesystem::path> file = std::nullopt, std::uint64_t next_seq = 1,
                    bool append = false, bool keep_in_memory = true);

  /// Assigns seq numbers in the given order and publishes the batch.
  void append_batch(std::vector<ActionEvent>& events);

  /// Events with seq > after, at most `limit` (0 = all).
  std::vector<ActionEvent> since(std::uint64_t after, std::size_t limit = 0) const;
  std::vector<ActionEvent> all() const { return since(0); }
  std::optional<ActionEvent> at(std::uint64_t seq) const;

  /// Waits until an event past `after` exists, the log closes or the timeout
  /// passes. Returns true when events are available.
  bool wait_for(std::uint64_t after, std::chrono::milliseconds timeout) const;
  void close();
  bool closed() const;

  std::uint64_t last_seq() const;
  std::uint64_t next_seq() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  mutable std::condition_variable grew_;
  std::vector<ActionEvent> events_;
  std::uint64_t first_seq_;
  std::uint64_t next_seq_;
  std::optional<std::filesystem::path> path_;
  std::ofstream file_;
  bool keep_;
  bool closed_ = false;
};

using ProfileGenerator = std::function<AgentProfile(AgentId id, KeyedRng& rng)>;

/// Synthetic residents: name, gender, age, occupation, hometown public;
/// income and health private.
AgentProfile default_profile(AgentId id, KeyedRng& rng);

/// Profiles with ids 1..n, each drawn from its own (seed, id) stream.
std::vector<AgentProfile> spawn_population(std::size_t n, const ProfileGenerator& generator, std::uint64_t seed);
std::vector<AgentProfile> spawn_population(std::size_t n, std::uint64_t seed);

/// Runs rounds of a scenario over a population. run_round holds the state lock
/// for the whole round; interviews, search and checkpoints wait for the
/// barrier. Stop and intervention submission are safe from any thread.
class Simulation {
 public:
  /// Builds the population and scenario state. Throws ConfigError before any
  /// round if the config or scenario init is invalid.
  explicit Simulation(SimulationConfig config, std::shared_ptr<Gateway> gateway = nullptr);

  /// Resumes from a checkpoint. Events continue at `next_seq`; the event log
  /// file, if configured, is appended to.
  static std::unique_ptr<Simulation> restore(const std::filesystem::path& checkpoint,
                                             std::shared_ptr<Gateway> gateway = nullptr,
                                             std::optional<std::string> event_log = std::nullopt);

  RoundReport run_round();
  /// Runs up to `rounds` rounds (default: until config.rounds are complete),
  /// stopping early at a barrier when a stop is requested or a round aborts.
  std::vector<RoundReport> run(std::optional<std::uint64_t> rounds = std::nullopt,
                               const std::function<void(const RoundReport&)>& on_round = {});

  void request_stop() noexcept { stop_.store(true); }
  void clear_stop() noexcept { stop_.store(false); }
  bool stop_requested() const noexcept { return stop_.load(); }

  /// Completed rounds.
  std::uint64_t current_round() const noexcept { return round_.load(); }
  bool finished() const noexcept { return round_.load() >= config_.rounds; }

  void checkpoint(const std::filesystem::path& path) const;

  /// Rejects rounds already started.
  void submit_intervention(Intervention intervention);
  std::vector<Intervention> pending_interventions() const;

  InterviewExchange interview(AgentId id, std::string_view question);
  std::vector<AgentProfile> search(std::string_view query) const;
  /// Copy of an agent taken under the state lock.
  Agent agent(AgentId id) const;
  std::size_t agent_count() const;

  /// Direct access; callers must not overlap with a running round.
  std::span<const Agent> agents() const noexcept { return agents_; }
  std::span<Agent> agents() noexcept { return agents_; }
  Scenario& scenario() noexcept { return *scenario_; }
  const Scenario& scenario() const noexcept { return *scenario_; }
  Environment& environment() noexcept { return env_; }
  EnvironmentState environment_state() const;

  EventLog& events() noexcept { return *events_; }
  const EventLog& events() const noexcept { return *events_; }
  std::vector<RoundReport> reports() const;

  Gateway& gateway() noexcept { return *gateway_; }
  std::shared_ptr<Gateway> gateway_shared() const { return gateway_; }
  /// Backend agents call; defaults to the gateway. Used to put an adapter in
  /// front of the gateway.
  void set_backend(std::shared_ptr<Backend> backend);
  std::shared_ptr<Backend> backend() const;

  const SimulationConfig& config() const noexcept { return config_; }

 private:
  struct RestoreTag {};
  Simulation(RestoreTag, SimulationConfig config, std::shared_ptr<Gateway> gateway);
  void setup_backend(std::shared_ptr<Gateway> gateway);
  std::size_t index_of(AgentId id) const;

  SimulationConfig config_;
  std::vector<Agent> agents_;
  std::unique_ptr<Scenario> scenario_;
  Environment env_;
  std::unique_ptr<EventLog> events_;
  std::shared_ptr<Gateway> gateway_;
  std::shared_ptr<Backend> backend_;
  std::vector<RoundReport> reports_;

  mutable std::mutex state_mutex_;
  mutable std::mutex backend_mutex_;
  std::atomic<bool> stop_{false};
  std::atomic<std::uint64_t> round_{0};
  /// First round an intervention submitted now can still reach.
  std::atomic<std::uint64_t> open_round_{0};
};

}  // namespace gensim
