#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gensim/agent.hpp"
#include "gensim/llm.hpp"

namespace gensim {

struct Role {
  std::string name;
  std::string persona;
};

Role role_for(const AgentProfile& profile);

struct Turn {
  std::string speaker;
  std::string content;
  std::size_t index = 0;

  bool operator==(const Turn&) const = default;
};

enum class InteractionMode { script, agent };

const char* to_string(InteractionMode mode);

struct Transcript {
  InteractionMode mode = InteractionMode::script;
  std::vector<Turn> turns;
  /// Completed backend calls. Script mode: 1. Agent mode: one per turn.
  std::size_t llm_calls = 0;
  /// Set when agent mode stopped early on a backend failure.
  std::optional<std::string> error;

  /// Throws ValidationError if indices are not 0..n-1, a speaker is not in
  /// `role_names`, a turn is empty, or llm_calls disagrees with the mode.
  void validate(std::span<const std::string> role_names) const;

  nlohmann::json to_json() const;
  static Transcript from_json(const nlohmann::json& j);
};

/// One meta-agent call writes the whole dialogue in "<Role>: <line>" form.
/// Lines naming an undeclared role, or with no content, are dropped.
/// Throws FormatError (with the raw reply) when no line parses.
Transcript run_script_mode(std::span<const Role> roles, std::string_view topic, std::size_t max_turns,
                           Backend& backend);

/// Parses "<Role>: <content>" lines against the declared role names.
std::vector<Turn> parse_script(std::string_view raw, std::span<const Role> roles, std::size_t max_turns);

struct TurnTrace {
  std::string prompt;
  std::string raw;
  Millis latency{0};
};

struct AgentModeContext {
  std::uint64_t round = 0;
  /// Environment text shown above the conversation (broadcasts, globals).
  std::string env_view;
};

/// Agents speak round-robin in list order, one backend call per turn. Every
/// prompt carries the speaker's persona, its retrieved memories and all
/// earlier turns verbatim; each turn is stored in the speaker's memory.
/// A backend failure ends the dialogue with the turns so far and `error` set.
/// `trace` gets one entry per call made, the failed one included.
Transcript run_agent_mode(std::span<Agent* const> agents, std::string_view topic, std::size_t max_turns,
                          Backend& backend, const AgentModeContext& context = {},
                          std::vector<TurnTrace>* trace = nullptr);

}  // namespace gensim
