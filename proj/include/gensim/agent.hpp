#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gensim/text.hpp"

namespace gensim {

class Backend;

struct AgentId {
  std::uint64_t value = 0;

  auto operator<=>(const AgentId&) const = default;
};

using AttributeMap = std::map<std::string, std::string>;

/// Who an agent is. Public attributes are visible to observers and search;
/// private ones only reach prompts that ask for them.
struct AgentProfile {
  AgentId id;
  AttributeMap public_attrs;
  AttributeMap private_attrs;

  /// Throws ValidationError if "name" is missing or the key sets overlap.
  void validate() const;
  const std::string& name() const;

  nlohmann::json to_json() const;
  static AgentProfile from_json(const nlohmann::json& j);

  bool operator==(const AgentProfile&) const = default;
};

enum class MemoryKind { observation, reflection };

const char* to_string(MemoryKind kind);
MemoryKind memory_kind_from_string(std::string_view s);

inline constexpr double kDefaultImportance = 0.5;
inline constexpr double kReflectionImportance = 1.0;

struct MemoryRecord {
  std::string content;
  std::uint64_t round = 0;
  double importance = kDefaultImportance;
  MemoryKind kind = MemoryKind::observation;

  nlohmann::json to_json() const;
  static MemoryRecord from_json(const nlohmann::json& j);

  bool operator==(const MemoryRecord&) const = default;
};

/// A capacity of 0 disables the short-term buffer; an infinite threshold
/// disables reflection.
struct MemoryConfig {
  std::size_t short_term_capacity = 5;
  std::size_t retrieval_k = 5;
  double reflection_threshold = 5.0;
  double recency_half_life = 10.0;

  void validate() const;
  nlohmann::json to_json() const;
  static MemoryConfig from_json(const nlohmann::json& j);
};

using SimilarityFn = std::function<double(std::string_view query, std::string_view content)>;

struct RetrievalOptions {
  double recency_weight = 1.0;
  double importance_weight = 1.0;
  double similarity_weight = 1.0;
  /// Empty means Jaccard over lowercase word sets.
  SimilarityFn similarity;
};

/// Long-term store (append-only) plus a bounded FIFO view of the most recent
/// records and the importance accumulated since the last reflection.
class MemoryStore {
 public:
  explicit MemoryStore(MemoryConfig config = {});

  /// Throws ValidationError if importance is outside [0,1] or the record is
  /// dated after `current_round`.
  void append(MemoryRecord record, std::uint64_t current_round);

  /// Top-k records by recency + importance + similarity. Ties go to the newer
  /// round, then to the earlier insertion.
  std::vector<MemoryRecord> retrieve(std::string_view query, std::size_t k,
                                     std::uint64_t current_round,
                                     const RetrievalOptions& options = {}) const;

  const std::vector<MemoryRecord>& long_term() const noexcept { return records_; }
  std::vector<MemoryRecord> short_term() const;
  std::size_t short_term_size() const noexcept { return short_term_.size(); }

  double importance_since_reflection() const noexcept { return pending_importance_; }
  bool reflection_due() const noexcept;

  /// Appends a reflection record and resets the accumulated importance.
  void append_reflection(MemoryRecord record, std::uint64_t current_round);
  const MemoryConfig& config() const noexcept { return config_; }

  nlohmann::json to_json() const;
  static MemoryStore from_json(const nlohmann::json& j, const MemoryConfig& config);

 private:
  MemoryConfig config_;
  std::vector<MemoryRecord> records_;
  std::vector<text::TokenSet> record_tokens_;
  std::vector<std::uint32_t> short_term_;  // indices into records_, oldest first
  double pending_importance_ = 0.0;
};

class Agent {
 public:
  Agent(AgentProfile profile, MemoryConfig memory_config);

  AgentId id() const noexcept { return profile_.id; }
  const AgentProfile& profile() const noexcept { return profile_; }
  MemoryStore& memory() noexcept { return memory_; }
  const MemoryStore& memory() const noexcept { return memory_; }

  void set_memory(MemoryStore memory) { memory_ = std::move(memory); }

 private:
  AgentProfile profile_;
  MemoryStore memory_;
};

/// Instruction sent with memories when an agent reflects.
inline constexpr std::string_view kReflectionInstruction =
    "Summarize the high-level insights you can infer from the memories below "
    "in one or two sentences.";

/// Synthesizes a reflection record when accumulated importance reaches the
/// threshold. Backend errors propagate and leave the counter unchanged.
std::optional<MemoryRecord> reflect(Agent& agent, Backend& backend, std::uint64_t current_round);

/// Memories shown to an agent: its short-term buffer (oldest first) followed by
/// retrieved long-term records not already in it.
std::vector<MemoryRecord> context_memories(const Agent& agent, std::string_view query,
                                           std::uint64_t current_round);

/// Prompt text with {profile}, {profile.private}, {memories}, {environment} and
/// {instruction} placeholders. Braces around anything else are literal unless
/// they look like a placeholder name, which is rejected as unbound.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);

  const std::string& text() const noexcept { return text_; }
  bool requests(std::string_view placeholder) const;

  static PromptTemplate default_agent();

 private:
  std::string text_;
  std::vector<std::string> placeholders_;
};

std::string render_profile(const AgentProfile& profile);
std::string render_private(const AgentProfile& profile);
std::string render_memories(std::span<const MemoryRecord> memories);

std::string render_prompt(const PromptTemplate& tmpl, const AgentProfile& profile,
                          std::span<const MemoryRecord> memories, std::string_view env_view,
                          std::string_view instruction);

/// Reads the JSON-lines population format. Rejects duplicate ids.
std::vector<AgentProfile> load_population(const std::filesystem::path& path);
void save_population(const std::filesystem::path& path, std::span<const AgentProfile> profiles);

}  // namespace gensim
