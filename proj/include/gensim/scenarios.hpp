#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gensim/interaction.hpp"
#include "gensim/rating.hpp"
#include "gensim/scenario.hpp"

namespace gensim {

struct JobPosting {
  std::uint64_t id = 0;
  std::string title;
  std::string required_skill;
  std::uint64_t capacity = 1;

  nlohmann::json to_json() const;
  static JobPosting from_json(const nlohmann::json& j);
};

std::vector<JobPosting> load_postings(const std::filesystem::path& path);

/// Unemployed agents each pick a posting; applications are granted in agent
/// id order until a posting is full. Every posting stays listed, full or not;
/// applying to a full one just fails. Hired agents stop applying.
class JobMarketScenario final : public PerAgentScenario {
 public:
  /// params: num_postings, max_capacity, postings (array), postings_file.
  explicit JobMarketScenario(const nlohmann::json& params = nlohmann::json::object());

  std::string name() const override { return "job_market"; }
  void init(std::vector<AgentProfile>& profiles, std::uint64_t seed) override;
  std::vector<TaskSpec> plan_round(std::span<const Agent> agents, const Environment& env) const override;
  AgentTask build_task(const Agent& agent, const Environment& env, const RoundContext& ctx) const override;
  nlohmann::json parse(std::string_view reply, const nlohmann::json& context) const override;
  std::vector<MemoryUpdate> resolve(std::span<const ActionOutcome> outcomes, std::uint64_t round) override;
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

  const std::vector<JobPosting>& postings() const noexcept { return postings_; }
  void set_postings(std::vector<JobPosting> postings);
  /// agent id -> posting id
  const std::map<std::uint64_t, std::uint64_t>& hires() const noexcept { return hires_; }
  std::uint64_t filled(std::uint64_t posting_id) const;
  std::uint64_t invalid_choices() const noexcept { return invalid_choices_; }

 private:
  std::size_t num_postings_ = 0;  // 0: one per 20 agents
  std::uint64_t max_capacity_ = 3;
  std::vector<JobPosting> postings_;
  std::map<std::uint64_t, std::uint64_t> filled_;
  std::map<std::uint64_t, std::uint64_t> hires_;
  std::uint64_t applications_ = 0;
  std::uint64_t invalid_choices_ = 0;
};

struct CatalogItem {
  std::uint64_t id = 0;
  std::string title;
  std::string genre;

  nlohmann::json to_json() const;
  static CatalogItem from_json(const nlohmann::json& j);
};

std::vector<CatalogItem> load_catalog(const std::filesystem::path& path);

struct RatingRow {
  std::uint64_t user_id = 0;
  std::uint64_t item_id = 0;
  double rating = 0.0;
  std::int64_t timestamp = 0;
};

/// Reads "userId,movieId,rating,timestamp" CSV (header required). `limit` = 0
/// reads everything.
std::vector<RatingRow> load_ratings_csv(const std::filesystem::path& path, std::size_t limit = 0);

using RatingHistogram = std::array<std::uint64_t, kRatingCount>;

/// Each agent receives k recommended items and rates every one of them.
/// Ratings snap to the scale and accumulate into a histogram.
class RecommenderScenario final : public PerAgentScenario {
 public:
  /// params: catalog_size, k, catalog_file, ratings_csv.
  explicit RecommenderScenario(const nlohmann::json& params = nlohmann::json::object());

  std::string name() const override { return "recommender"; }
  void init(std::vector<AgentProfile>& profiles, std::uint64_t seed) override;
  std::vector<TaskSpec> plan_round(std::span<const Agent> agents, const Environment& env) const override;
  AgentTask build_task(const Agent& agent, const Environment& env, const RoundContext& ctx) const override;
  nlohmann::json parse(std::string_view reply, const nlohmann::json& context) const override;
  std::vector<MemoryUpdate> resolve(std::span<const ActionOutcome> outcomes, std::uint64_t round) override;
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

  /// Uniform-random k distinct catalog items, keyed by (seed, round, agent).
  std::vector<std::uint64_t> recommend(AgentId agent, std::uint64_t round, std::uint64_t seed) const;

  const std::vector<CatalogItem>& catalog() const noexcept { return catalog_; }
  const RatingHistogram& histogram() const noexcept { return histogram_; }
  const RatingHistogram& last_round_histogram() const noexcept { return last_round_; }
  std::uint64_t accepted() const noexcept { return accepted_; }
  std::uint64_t skipped() const noexcept { return skipped_; }
  std::size_t k() const noexcept { return k_; }

 private:
  std::size_t catalog_size_ = 200;
  std::size_t k_ = 5;
  std::vector<CatalogItem> catalog_;
  std::map<std::uint64_t, std::size_t> index_;
  RatingHistogram histogram_{};
  RatingHistogram last_round_{};
  std::uint64_t accepted_ = 0;
  std::uint64_t skipped_ = 0;
};

/// Agents talk in groups (agent mode); groups are consecutive runs of the
/// population in id order.
class GroupDiscussionScenario final : public Scenario {
 public:
  /// params: group_size (>= 2), max_turns, topic. A "topic" global overrides
  /// the topic for the rounds it is set.
  explicit GroupDiscussionScenario(const nlohmann::json& params = nlohmann::json::object());

  std::string name() const override { return "group_discussion"; }
  void init(std::vector<AgentProfile>& profiles, std::uint64_t seed) override;
  std::vector<TaskSpec> plan_round(std::span<const Agent> agents, const Environment& env) const override;
  TaskResult execute(const TaskSpec& task, std::span<Agent* const> members, const RoundContext& ctx) const override;
  std::vector<MemoryUpdate> resolve(std::span<const ActionOutcome> outcomes, std::uint64_t round) override;
  nlohmann::json save_state() const override;
  void load_state(const nlohmann::json& state) override;

  const std::vector<Transcript>& transcripts() const noexcept { return transcripts_; }
  std::size_t group_size() const noexcept { return group_size_; }

 private:
  std::size_t group_size_ = 5;
  std::size_t max_turns_ = 10;
  std::string topic_ = "how the town should spend next year's budget";
  std::vector<Transcript> transcripts_;
};

}  // namespace gensim
