#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gensim/agent.hpp"
#include "gensim/environment.hpp"
#include "gensim/llm.hpp"

namespace gensim {

struct SimulationConfig;

/// Agents acting together in one task. Per-agent scenarios use one member.
struct TaskSpec {
  std::vector<std::size_t> members;  // indices into the population, ascending id
};

/// One model call made on behalf of an agent, with its parsed action.
struct ActionOutcome {
  AgentId agent_id;
  std::size_t turn = 0;
  std::string q;
  std::string a;
  nlohmann::json parsed;
  Millis latency{0};
  std::optional<std::string> error;
};

struct TaskResult {
  std::vector<ActionOutcome> outcomes;
  /// A terminal backend failure ended the task.
  bool failed = false;
};

struct RoundContext {
  std::uint64_t round = 0;
  std::uint64_t seed = 0;
  const Environment& env;
  Backend& backend;
};

struct MemoryUpdate {
  AgentId agent_id;
  MemoryRecord record;
};

/// What a scenario contributes to a round. plan_round and resolve run
/// single-threaded at the barrier; execute runs on workers, one task per
/// worker, with exclusive access to the task's members.
class Scenario {
 public:
  virtual ~Scenario() = default;

  virtual std::string name() const = 0;

  /// Adds scenario attributes to generated profiles and builds the initial state.
  virtual void init(std::vector<AgentProfile>& profiles, std::uint64_t seed) = 0;

  virtual std::vector<TaskSpec> plan_round(std::span<const Agent> agents, const Environment& env) const = 0;

  virtual TaskResult execute(const TaskSpec& task, std::span<Agent* const> members,
                             const RoundContext& ctx) const = 0;

  /// Applies the round's actions, given sorted by agent id, and returns the
  /// memories agents should form.
  virtual std::vector<MemoryUpdate> resolve(std::span<const ActionOutcome> outcomes, std::uint64_t round) = 0;

  virtual nlohmann::json save_state() const = 0;
  virtual void load_state(const nlohmann::json& state) = 0;
};

/// A single agent's prompt for one round.
struct AgentTask {
  std::string instruction;
  std::string scenario_view;
  /// Retrieval query for the agent's memories.
  std::string memory_query;
  nlohmann::json context;
};

/// Scenarios where every task is one agent making one call: build the prompt,
/// call the backend, parse the reply.
class PerAgentScenario : public Scenario {
 public:
  TaskResult execute(const TaskSpec& task, std::span<Agent* const> members,
                     const RoundContext& ctx) const override;

  virtual AgentTask build_task(const Agent& agent, const Environment& env, const RoundContext& ctx) const = 0;
  /// Total: malformed replies map to a default action, never an exception.
  virtual nlohmann::json parse(std::string_view reply, const nlohmann::json& context) const = 0;
};

std::vector<std::string> scenario_names();
/// Throws ConfigError naming the "scenario" field for unknown names, or the
/// offending parameter for bad scenario_params.
std::unique_ptr<Scenario> make_scenario(const std::string& name, const nlohmann::json& params);

}  // namespace gensim
