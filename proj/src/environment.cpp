#include "gensim/environment.hpp"

#include <algorithm>
#include <fstream>

#include "gensim/error.hpp"

namespace gensim {

using nlohmann::json;

json EnvironmentState::to_json() const {
  return json{{"round", round}, {"globals", globals}, {"scenario_state", scenario_state}};
}

EnvironmentState EnvironmentState::from_json(const json& j) {
  EnvironmentState s;
  s.round = j.at("round").get<std::uint64_t>();
  s.globals = j.at("globals").get<std::map<std::string, std::string>>();
  s.scenario_state = j.at("scenario_state");
  return s;
}

const char* to_string(IssuedBy by) {
  switch (by) {
    case IssuedBy::api: return "api";
    case IssuedBy::ui: return "ui";
    case IssuedBy::script: return "script";
  }
  return "api";
}

IssuedBy issued_by_from_string(std::string_view s) {
  if (s == "api") return IssuedBy::api;
  if (s == "ui") return IssuedBy::ui;
  if (s == "script") return IssuedBy::script;
  throw ValidationError("unknown issued_by '" + std::string(s) + "'");
}

json Intervention::to_json() const {
  json j{{"apply_at_round", apply_at_round}, {"issued_by", to_string(issued_by)}};
  if (const auto* g = std::get_if<SetGlobal>(&action)) {
    j["kind"] = "set_global";
    j["key"] = g->key;
    j["value"] = g->value;
  } else {
    j["kind"] = "broadcast";
    j["message"] = std::get<Broadcast>(action).message;
  }
  return j;
}

Intervention Intervention::from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("intervention: must be an object");
  Intervention i;
  if (!j.contains("apply_at_round") || !j["apply_at_round"].is_number_integer()) {
    throw ValidationError("intervention.apply_at_round: integer required");
  }
  if (j["apply_at_round"].get<long long>() < 0) throw ValidationError("intervention.apply_at_round: must be >= 0");
  i.apply_at_round = j["apply_at_round"].get<std::uint64_t>();
  i.issued_by = issued_by_from_string(j.value("issued_by", std::string("api")));
  const auto kind = j.value("kind", std::string());
  if (kind == "set_global") {
    if (!j.contains("key") || !j["key"].is_string() || j["key"].get<std::string>().empty()) {
      throw ValidationError("intervention.key: non-empty string required");
    }
    i.action = SetGlobal{j["key"].get<std::string>(), j.value("value", std::string())};
  } else if (kind == "broadcast") {
    if (!j.contains("message") || !j["message"].is_string()) {
      throw ValidationError("intervention.message: string required");
    }
    i.action = Broadcast{j["message"].get<std::string>()};
  } else {
    throw ValidationError("intervention.kind: expected set_global or broadcast");
  }
  return i;
}

void InterventionQueue::submit(Intervention intervention, std::uint64_t current_round) {
  if (intervention.apply_at_round < current_round) {
    throw ValidationError("intervention for round " + std::to_string(intervention.apply_at_round) +
                          " is in the past (current round " + std::to_string(current_round) + ")");
  }
  std::lock_guard lock(mutex_);
  items_.push_back(std::move(intervention));
}

std::vector<Intervention> InterventionQueue::take_due(std::uint64_t round) {
  std::lock_guard lock(mutex_);
  std::vector<Intervention> due;
  std::vector<Intervention> rest;
  for (auto& i : items_) (i.apply_at_round <= round ? due : rest).push_back(std::move(i));
  items_ = std::move(rest);
  return due;
}

void InterventionQueue::restore_front(std::vector<Intervention> items) {
  std::lock_guard lock(mutex_);
  items.insert(items.end(), std::make_move_iterator(items_.begin()), std::make_move_iterator(items_.end()));
  items_ = std::move(items);
}

std::vector<Intervention> InterventionQueue::pending() const {
  std::lock_guard lock(mutex_);
  return items_;
}

std::size_t InterventionQueue::size() const {
  std::lock_guard lock(mutex_);
  return items_.size();
}

json InterviewExchange::to_json() const {
  return json{{"agent_id", agent_id.value}, {"question", question}, {"answer", answer}, {"round", round}};
}

std::vector<Intervention> Environment::apply_due() {
  broadcasts_.clear();
  auto due = queue_.take_due(state_.round);
  for (const auto& i : due) {
    if (const auto* g = std::get_if<SetGlobal>(&i.action)) {
      state_.globals[g->key] = g->value;
    } else {
      broadcasts_.push_back(std::get<Broadcast>(i.action).message);
    }
  }
  return due;
}

void Environment::undo_apply(std::vector<Intervention> applied, std::map<std::string, std::string> previous_globals) {
  state_.globals = std::move(previous_globals);
  broadcasts_.clear();
  queue_.restore_front(std::move(applied));
}

std::string Environment::agent_view(std::string_view scenario_view) const {
  std::string out;
  for (const auto& b : broadcasts_) {
    out += "Announcement: ";
    out += b;
    out += '\n';
  }
  if (!state_.globals.empty()) {
    out += "World facts:\n";
    for (const auto& [k, v] : state_.globals) out += "- " + k + ": " + v + "\n";
  }
  out.append(scenario_view);
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

void Environment::log_interview(InterviewExchange exchange) {
  std::lock_guard lock(interview_mutex_);
  interviews_.push_back(std::move(exchange));
}

std::vector<InterviewExchange> Environment::interview_log() const {
  std::lock_guard lock(interview_mutex_);
  return interviews_;
}

InterviewExchange interview(const Agent& agent, std::string_view question, Backend& backend,
                            std::uint64_t current_round) {
  const auto& memory = agent.memory();
  std::vector<MemoryRecord> memories;
  if (!memory.long_term().empty()) memories = memory.retrieve(question, memory.config().retrieval_k, current_round);
  const auto prompt = render_prompt(PromptTemplate::default_agent(), agent.profile(), memories,
                                    "An interviewer is asking you a question.",
                                    "Answer the interviewer in character.\nQuestion: " + std::string(question));
  auto response = backend.complete(ChatRequest::from_prompt(prompt));
  return InterviewExchange{agent.id(), std::string(question), std::string(text::trim(response.content)),
                           current_round};
}

std::vector<AgentProfile> search_agents(std::span<const Agent> agents, std::string_view query) {
  std::vector<AgentProfile> out;
  for (const auto& a : agents) {
    const auto& attrs = a.profile().public_attrs;
    const bool hit = query.empty() || std::any_of(attrs.begin(), attrs.end(), [&](const auto& kv) {
                       return text::contains_icase(kv.second, query);
                     });
    if (hit) out.push_back(a.profile());
  }
  std::sort(out.begin(), out.end(), [](const AgentProfile& x, const AgentProfile& y) { return x.id < y.id; });
  return out;
}

namespace {

constexpr const char* kFormatName = "gensim-checkpoint";
constexpr const char* kSectionOrder[] = {"config", "profiles", "memories", "env", "rng", "queue"};

void write_section(std::ostream& out, const char* name, const std::vector<json>& lines) {
  out << json{{"section", name}, {"count", lines.size()}}.dump() << '\n';
  for (const auto& l : lines) out << l.dump() << '\n';
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    json header{{"format", kFormatName},
                {"version", CheckpointData::kFormatVersion},
                {"round", data.round},
                {"sections", kSectionOrder}};
    out << header.dump() << '\n';
    write_section(out, "config", {data.config});
    write_section(out, "profiles", data.profiles);
    write_section(out, "memories", data.memories);
    write_section(out, "env", {data.env});
    write_section(out, "rng", {data.rng});
    write_section(out, "queue", data.queue);
    if (!out.flush()) throw IoError("cannot write checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string line;
  auto next_json = [&](const char* what) {
    if (!std::getline(in, line)) throw IoError("checkpoint " + path.string() + ": truncated before " + what);
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw IoError("checkpoint " + path.string() + ": malformed " + what);
    return j;
  };

  const auto header = next_json("header");
  if (!header.is_object() || header.value("format", "") != kFormatName) {
    throw IoError("checkpoint " + path.string() + ": not a checkpoint archive");
  }
  if (header.value("version", 0) != CheckpointData::kFormatVersion) {
    throw IoError("checkpoint " + path.string() + ": unsupported version");
  }
  CheckpointData data;
  data.round = header.value("round", std::uint64_t{0});

  auto read_section = [&](const char* name) {
    const auto h = next_json("section header");
    if (!h.is_object() || h.value("section", "") != name || !h.contains("count") || !h["count"].is_number_unsigned()) {
      throw IoError("checkpoint " + path.string() + ": expected section '" + name + "'");
    }
    std::vector<json> lines;
    const auto count = h["count"].get<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) lines.push_back(next_json(name));
    return lines;
  };
  auto single = [&](const char* name) {
    auto lines = read_section(name);
    if (lines.size() != 1) throw IoError("checkpoint " + path.string() + ": section '" + name + "' must hold one line");
    return lines.front();
  };

  data.config = single("config");
  data.profiles = read_section("profiles");
  data.memories = read_section("memories");
  data.env = single("env");
  data.rng = single("rng");
  data.queue = read_section("queue");
  if (data.profiles.size() != data.memories.size()) {
    throw IoError("checkpoint " + path.string() + ": profile and memory counts differ");
  }
  return data;
}

}  // namespace gensim
