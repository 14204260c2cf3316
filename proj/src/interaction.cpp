#include "gensim/interaction.hpp"

#include <algorithm>
#include <set>

#include "gensim/directives.hpp"
#include "gensim/error.hpp"

namespace gensim {

using nlohmann::json;

Role role_for(const AgentProfile& profile) {
  return Role{profile.name(), render_profile(profile)};
}

const char* to_string(InteractionMode mode) { return mode == InteractionMode::agent ? "agent" : "script"; }

void Transcript::validate(std::span<const std::string> role_names) const {
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& t = turns[i];
    if (t.index != i) throw ValidationError("transcript: turn indices must be consecutive from 0");
    if (t.content.empty()) throw ValidationError("transcript: empty turn content");
    if (std::find(role_names.begin(), role_names.end(), t.speaker) == role_names.end()) {
      throw ValidationError("transcript: unknown speaker '" + t.speaker + "'");
    }
  }
  if (mode == InteractionMode::script && llm_calls != 1) {
    throw ValidationError("transcript: script mode makes exactly one call");
  }
  if (mode == InteractionMode::agent && llm_calls != turns.size()) {
    throw ValidationError("transcript: agent mode makes one call per turn");
  }
}

json Transcript::to_json() const {
  json turns_json = json::array();
  for (const auto& t : turns) {
    turns_json.push_back({{"index", t.index}, {"speaker", t.speaker}, {"content", t.content}});
  }
  json j{{"mode", to_string(mode)}, {"turns", std::move(turns_json)}, {"llm_calls", llm_calls}};
  if (error) j["error"] = *error;
  return j;
}

Transcript Transcript::from_json(const json& j) {
  Transcript t;
  t.mode = j.at("mode").get<std::string>() == "agent" ? InteractionMode::agent : InteractionMode::script;
  for (const auto& tj : j.at("turns")) {
    t.turns.push_back(
        Turn{tj.at("speaker").get<std::string>(), tj.at("content").get<std::string>(), tj.at("index").get<std::size_t>()});
  }
  t.llm_calls = j.at("llm_calls").get<std::size_t>();
  if (j.contains("error")) t.error = j["error"].get<std::string>();
  return t;
}

namespace {

void validate_roles(std::span<const Role> roles) {
  if (roles.size() < 2) throw ValidationError("interaction needs at least two roles");
  std::set<std::string> names;
  for (const auto& r : roles) {
    if (r.name.empty() || r.name.find_first_of(":,\n") != std::string::npos) {
      throw ValidationError("role name '" + r.name + "' must be non-empty without ':', ',' or newlines");
    }
    if (!names.insert(r.name).second) throw ValidationError("duplicate role name '" + r.name + "'");
  }
}

std::string one_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

}  // namespace

std::vector<Turn> parse_script(std::string_view raw, std::span<const Role> roles, std::size_t max_turns) {
  std::vector<Turn> turns;
  for (auto line : text::split_lines(raw)) {
    if (turns.size() >= max_turns) break;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    const auto name = text::trim(line.substr(0, colon));
    const auto content = text::trim(line.substr(colon + 1));
    if (content.empty()) continue;
    auto hit = std::find_if(roles.begin(), roles.end(), [&](const Role& r) { return r.name == name; });
    if (hit == roles.end()) continue;
    turns.push_back(Turn{hit->name, std::string(content), turns.size()});
  }
  return turns;
}

Transcript run_script_mode(std::span<const Role> roles, std::string_view topic, std::size_t max_turns,
                           Backend& backend) {
  validate_roles(roles);
  if (max_turns < 1) throw ValidationError("max_turns must be >= 1");

  std::string prompt = "Write a realistic conversation between the people below.\nTopic: ";
  prompt += one_line(topic);
  prompt += "\nParticipants:\n";
  std::vector<std::string> names;
  for (const auto& r : roles) {
    prompt += "- " + r.name + " (" + one_line(r.persona) + ")\n";
    names.push_back(r.name);
  }
  prompt += "Write at most " + std::to_string(max_turns) +
            " lines. Every line must have the form \"<Name>: <what they say>\".\n";
  prompt += std::string(directives::kDialogueRoles) + " " + text::join(names, ", ") + "\n";
  prompt += std::string(directives::kTurns) + " " + std::to_string(max_turns);

  auto response = backend.complete(ChatRequest::from_prompt(std::move(prompt)));
  Transcript t;
  t.mode = InteractionMode::script;
  t.llm_calls = 1;
  t.turns = parse_script(response.content, roles, max_turns);
  if (t.turns.empty()) throw FormatError("script mode: no \"<Role>: <content>\" lines in reply", response.content);
  return t;
}

Transcript run_agent_mode(std::span<Agent* const> agents, std::string_view topic, std::size_t max_turns,
                          Backend& backend, const AgentModeContext& context, std::vector<TurnTrace>* trace) {
  if (agents.size() < 2) throw ValidationError("agent mode needs at least two agents");
  if (max_turns < 1) throw ValidationError("max_turns must be >= 1");

  // Speaker labels: profile names, disambiguated by id when two agents share one.
  std::vector<std::string> labels;
  for (const auto* a : agents) {
    if (!a) throw ValidationError("agent mode: null agent");
    const auto& name = a->profile().name();
    const auto count = std::count_if(agents.begin(), agents.end(),
                                     [&](const Agent* b) { return b->profile().name() == name; });
    labels.push_back(count > 1 || name.empty() ? name + " #" + std::to_string(a->id().value) : name);
  }
  std::vector<Role> roles;
  for (std::size_t i = 0; i < agents.size(); ++i) roles.push_back(Role{labels[i], render_profile(agents[i]->profile())});
  validate_roles(roles);

  const auto tmpl = PromptTemplate::default_agent();
  Transcript t;
  t.mode = InteractionMode::agent;
  std::string history;
  for (std::size_t turn = 0; turn < max_turns; ++turn) {
    const std::size_t who = turn % agents.size();
    Agent& speaker = *agents[who];

    std::string env = context.env_view;
    if (!env.empty()) env += '\n';
    env += "You are in a group discussion with " + text::join(labels, ", ") + ".\nTopic: " + one_line(topic) +
           "\nConversation so far:\n" + (history.empty() ? std::string("(nobody has spoken yet)") : history);
    const std::string instruction = "Say your next line in the conversation, speaking as yourself.\n" +
                                    std::string(directives::kSpeaker) + " " + labels[who];
    auto memories = context_memories(speaker, topic, context.round);
    auto prompt = render_prompt(tmpl, speaker.profile(), memories, env, instruction);

    ChatResponse response;
    try {
      response = backend.complete(ChatRequest::from_prompt(prompt));
    } catch (const std::exception& e) {
      t.error = std::string("turn ") + std::to_string(turn) + ": " + e.what();
      if (trace) trace->push_back(TurnTrace{std::move(prompt), std::string(), Millis{0}});
      return t;
    }
    std::string_view content = text::trim(response.content);
    const std::string own_prefix = labels[who] + ":";
    if (content.substr(0, own_prefix.size()) == own_prefix) content = text::trim(content.substr(own_prefix.size()));
    if (content.empty()) {
      t.error = "turn " + std::to_string(turn) + ": empty reply";
      if (trace) trace->push_back(TurnTrace{std::move(prompt), response.content, response.latency});
      return t;
    }

    t.turns.push_back(Turn{labels[who], std::string(content), turn});
    t.llm_calls = t.turns.size();
    if (!history.empty()) history += '\n';
    history += labels[who] + ": " + std::string(content);
    speaker.memory().append(
        MemoryRecord{"In a discussion about " + one_line(topic) + " I said: " + std::string(content), context.round,
                     kDefaultImportance, MemoryKind::observation},
        context.round);
    if (trace) trace->push_back(TurnTrace{std::move(prompt), response.content, response.latency});
  }
  return t;
}

}  // namespace gensim
