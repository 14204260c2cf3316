#include "gensim/agent.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "gensim/error.hpp"
#include "gensim/llm.hpp"

namespace gensim {

using nlohmann::json;

void AgentProfile::validate() const {
  if (!public_attrs.contains("name")) {
    throw ValidationError("profile " + std::to_string(id.value) + ": missing public attribute 'name'");
  }
  for (const auto& [key, value] : private_attrs) {
    if (public_attrs.contains(key)) {
      throw ValidationError("profile " + std::to_string(id.value) + ": attribute '" + key +
                            "' is both public and private");
    }
  }
}

const std::string& AgentProfile::name() const {
  static const std::string empty;
  auto it = public_attrs.find("name");
  return it == public_attrs.end() ? empty : it->second;
}

json AgentProfile::to_json() const {
  return json{{"id", id.value}, {"public", public_attrs}, {"private", private_attrs}};
}

AgentProfile AgentProfile::from_json(const json& j) {
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned()) {
    throw ValidationError("profile: 'id' must be a non-negative integer");
  }
  AgentProfile p;
  p.id = AgentId{j["id"].get<std::uint64_t>()};
  if (j.contains("public")) p.public_attrs = j["public"].get<AttributeMap>();
  if (j.contains("private")) p.private_attrs = j["private"].get<AttributeMap>();
  p.validate();
  return p;
}

const char* to_string(MemoryKind kind) {
  return kind == MemoryKind::reflection ? "reflection" : "observation";
}

MemoryKind memory_kind_from_string(std::string_view s) {
  if (s == "observation") return MemoryKind::observation;
  if (s == "reflection") return MemoryKind::reflection;
  throw ValidationError("unknown memory kind '" + std::string(s) + "'");
}

json MemoryRecord::to_json() const {
  return json{{"content", content}, {"round", round}, {"importance", importance}, {"kind", to_string(kind)}};
}

MemoryRecord MemoryRecord::from_json(const json& j) {
  MemoryRecord r;
  r.content = j.at("content").get<std::string>();
  r.round = j.at("round").get<std::uint64_t>();
  r.importance = j.at("importance").get<double>();
  r.kind = memory_kind_from_string(j.at("kind").get<std::string>());
  return r;
}

void MemoryConfig::validate() const {
  std::vector<std::string> errors;
  if (retrieval_k == 0) errors.push_back("memory.retrieval_k: must be positive");
  if (!(reflection_threshold > 0.0)) errors.push_back("memory.reflection_threshold: must be positive");
  if (!(recency_half_life > 0.0) || std::isinf(recency_half_life)) {
    errors.push_back("memory.recency_half_life: must be positive and finite");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

json MemoryConfig::to_json() const {
  json j{{"short_term_capacity", short_term_capacity},
         {"retrieval_k", retrieval_k},
         {"recency_half_life", recency_half_life}};
  // JSON has no infinity; null means reflection is disabled.
  if (std::isinf(reflection_threshold)) {
    j["reflection_threshold"] = nullptr;
  } else {
    j["reflection_threshold"] = reflection_threshold;
  }
  return j;
}

MemoryConfig MemoryConfig::from_json(const json& j) {
  MemoryConfig c;
  if (!j.is_object()) throw ConfigError({"memory: must be an object"});
  c.short_term_capacity = j.value("short_term_capacity", c.short_term_capacity);
  c.retrieval_k = j.value("retrieval_k", c.retrieval_k);
  if (j.contains("reflection_threshold")) {
    const auto& t = j["reflection_threshold"];
    c.reflection_threshold =
        t.is_null() ? std::numeric_limits<double>::infinity() : t.get<double>();
  }
  c.recency_half_life = j.value("recency_half_life", c.recency_half_life);
  return c;
}

MemoryStore::MemoryStore(MemoryConfig config) : config_(config) {}

void MemoryStore::append(MemoryRecord record, std::uint64_t current_round) {
  if (!(record.importance >= 0.0 && record.importance <= 1.0)) {
    throw ValidationError("memory importance must lie in [0,1], got " + std::to_string(record.importance));
  }
  if (record.round > current_round) {
    throw ValidationError("memory record dated round " + std::to_string(record.round) +
                          " is after current round " + std::to_string(current_round));
  }
  pending_importance_ += record.importance;
  record_tokens_.emplace_back(record.content);
  records_.push_back(std::move(record));
  if (config_.short_term_capacity > 0) {
    short_term_.push_back(static_cast<std::uint32_t>(records_.size() - 1));
    if (short_term_.size() > config_.short_term_capacity) short_term_.erase(short_term_.begin());
  }
}

void MemoryStore::append_reflection(MemoryRecord record, std::uint64_t current_round) {
  record.kind = MemoryKind::reflection;
  append(std::move(record), current_round);
  pending_importance_ = 0.0;
}

bool MemoryStore::reflection_due() const noexcept {
  return pending_importance_ >= config_.reflection_threshold;
}

std::vector<MemoryRecord> MemoryStore::short_term() const {
  std::vector<MemoryRecord> out;
  out.reserve(short_term_.size());
  for (auto idx : short_term_) out.push_back(records_[idx]);
  return out;
}

std::vector<MemoryRecord> MemoryStore::retrieve(std::string_view query, std::size_t k,
                                                std::uint64_t current_round,
                                                const RetrievalOptions& options) const {
  if (k == 0) throw ValidationError("retrieve: k must be positive");
  if (records_.empty()) return {};

  const text::TokenSet query_tokens(query);
  const double decay = std::log(2.0) / config_.recency_half_life;
  std::vector<double> scores(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    const double age = static_cast<double>(current_round) - static_cast<double>(r.round);
    const double recency = std::exp(-decay * age);
    const double similarity = options.similarity ? options.similarity(query, r.content)
                                                 : text::jaccard(query_tokens, record_tokens_[i]);
    scores[i] = options.recency_weight * recency + options.importance_weight * r.importance +
                options.similarity_weight * similarity;
  }

  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (records_[a].round != records_[b].round) return records_[a].round > records_[b].round;
    return a < b;
  };
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);

  std::vector<MemoryRecord> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(records_[order[i]]);
  return out;
}

json MemoryStore::to_json() const {
  json records = json::array();
  for (const auto& r : records_) records.push_back(r.to_json());
  return json{{"records", std::move(records)},
              {"short_term", short_term_},
              {"pending_importance", pending_importance_}};
}

MemoryStore MemoryStore::from_json(const json& j, const MemoryConfig& config) {
  MemoryStore store(config);
  for (const auto& r : j.at("records")) {
    auto rec = MemoryRecord::from_json(r);
    store.record_tokens_.emplace_back(rec.content);
    store.records_.push_back(std::move(rec));
  }
  store.short_term_ = j.at("short_term").get<std::vector<std::uint32_t>>();
  for (auto idx : store.short_term_) {
    if (idx >= store.records_.size()) throw ValidationError("memory: short-term index out of range");
  }
  store.pending_importance_ = j.at("pending_importance").get<double>();
  return store;
}

Agent::Agent(AgentProfile profile, MemoryConfig memory_config)
    : profile_(std::move(profile)), memory_(memory_config) {}

std::optional<MemoryRecord> reflect(Agent& agent, Backend& backend, std::uint64_t current_round) {
  auto& memory = agent.memory();
  if (!memory.reflection_due()) return std::nullopt;

  const auto top = memory.retrieve("", memory.config().retrieval_k, current_round);
  std::string prompt;
  prompt += "You are ";
  prompt += agent.profile().name();
  prompt += ".\n";
  prompt += kReflectionInstruction;
  prompt += "\nMemories:\n";
  prompt += render_memories(top);

  auto response = backend.complete(ChatRequest::from_prompt(std::move(prompt)));
  MemoryRecord record{std::string(text::trim(response.content)), current_round, kReflectionImportance,
                      MemoryKind::reflection};
  memory.append_reflection(record, current_round);
  return record;
}

std::vector<MemoryRecord> context_memories(const Agent& agent, std::string_view query,
                                           std::uint64_t current_round) {
  const auto& memory = agent.memory();
  auto out = memory.short_term();
  if (memory.long_term().empty()) return out;
  for (auto& rec : memory.retrieve(query, memory.config().retrieval_k, current_round)) {
    if (std::find(out.begin(), out.end(), rec) == out.end()) out.push_back(std::move(rec));
  }
  return out;
}

namespace {

constexpr std::string_view kKnownPlaceholders[] = {"profile", "profile.private", "memories",
                                                   "environment", "instruction"};

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

struct Placeholder {
  std::size_t begin;
  std::size_t end;  // one past '}'
  std::string_view name;
};

std::vector<Placeholder> scan_placeholders(std::string_view text) {
  std::vector<Placeholder> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    std::size_t j = i + 1;
    if (j >= text.size() || !(std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_')) continue;
    while (j < text.size() && is_name_char(text[j])) ++j;
    if (j < text.size() && text[j] == '}') {
      out.push_back({i, j + 1, text.substr(i + 1, j - i - 1)});
      i = j;
    }
  }
  return out;
}

std::string one_line(std::string_view s) {
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  for (const auto& p : scan_placeholders(text_)) {
    if (std::find(std::begin(kKnownPlaceholders), std::end(kKnownPlaceholders), p.name) ==
        std::end(kKnownPlaceholders)) {
      throw ValidationError("prompt template: unbound placeholder {" + std::string(p.name) + "}");
    }
    placeholders_.emplace_back(p.name);
  }
}

bool PromptTemplate::requests(std::string_view placeholder) const {
  return std::find(placeholders_.begin(), placeholders_.end(), placeholder) != placeholders_.end();
}

PromptTemplate PromptTemplate::default_agent() {
  return PromptTemplate(
      "You are a person taking part in a social simulation. Stay in character.\n"
      "Profile:\n{profile}\n"
      "Private details:\n{profile.private}\n"
      "Relevant memories:\n{memories}\n"
      "Current situation:\n{environment}\n"
      "Task:\n{instruction}");
}

namespace {

std::string render_attrs(const AttributeMap& attrs, bool name_first) {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) {
    if (!out.empty()) out += '\n';
    out += k;
    out += ": ";
    out += one_line(v);
  };
  if (name_first) {
    if (auto it = attrs.find("name"); it != attrs.end()) line(it->first, it->second);
  }
  for (const auto& [k, v] : attrs) {
    if (name_first && k == "name") continue;
    line(k, v);
  }
  return out;
}

}  // namespace

std::string render_profile(const AgentProfile& profile) { return render_attrs(profile.public_attrs, true); }

std::string render_private(const AgentProfile& profile) { return render_attrs(profile.private_attrs, false); }

std::string render_memories(std::span<const MemoryRecord> memories) {
  std::string out;
  for (const auto& m : memories) {
    if (!out.empty()) out += '\n';
    out += "- [round ";
    out += std::to_string(m.round);
    out += m.kind == MemoryKind::reflection ? ", reflection] " : "] ";
    out += one_line(m.content);
  }
  if (out.empty()) out = "(none)";
  return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const AgentProfile& profile,
                          std::span<const MemoryRecord> memories, std::string_view env_view,
                          std::string_view instruction) {
  const std::string_view text = tmpl.text();
  std::string out;
  out.reserve(text.size() + instruction.size() + env_view.size() + 256);
  std::size_t pos = 0;
  for (const auto& p : scan_placeholders(text)) {
    out.append(text.substr(pos, p.begin - pos));
    if (p.name == "profile") {
      out += render_profile(profile);
    } else if (p.name == "profile.private") {
      out += render_private(profile);
    } else if (p.name == "memories") {
      out += render_memories(memories);
    } else if (p.name == "environment") {
      out.append(env_view);
    } else if (p.name == "instruction") {
      out.append(instruction);
    } else {
      throw ValidationError("prompt template: unbound placeholder {" + std::string(p.name) + "}");
    }
    pos = p.end;
  }
  out.append(text.substr(pos));
  return out;
}

std::vector<AgentProfile> load_population(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open population file " + path.string());
  std::vector<AgentProfile> out;
  std::set<std::uint64_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    auto profile = AgentProfile::from_json(j);
    if (!seen.insert(profile.id.value).second) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": duplicate agent id " +
                            std::to_string(profile.id.value));
    }
    out.push_back(std::move(profile));
  }
  return out;
}

void save_population(const std::filesystem::path& path, std::span<const AgentProfile> profiles) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write population file " + path.string());
  for (const auto& p : profiles) out << p.to_json().dump() << '\n';
}

}  // namespace gensim
