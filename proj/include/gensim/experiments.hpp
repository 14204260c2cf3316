#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "gensim/llm.hpp"
#include "gensim/rating.hpp"
#include "gensim/scenarios.hpp"

namespace gensim {

/// Probabilities over the rating scale, ascending.
using RatingDistribution = std::array<double, kRatingCount>;

/// Throws ValidationError for an empty histogram.
RatingDistribution normalize(const RatingHistogram& counts);

struct FluctuationResult {
  std::size_t sample_size = 0;
  std::size_t repeats = 0;
  double v_sum = 0.0;
  std::array<double, kRatingCount> per_rating_v{};

  nlohmann::json to_json() const;
};

/// Population standard deviation of each rating's probability across runs,
/// and their sum. Needs at least two normalized distributions.
FluctuationResult fluctuation(std::span<const RatingDistribution> distributions);

struct FluctuationConfig {
  std::vector<std::size_t> sample_sizes{300, 3000, 30000};
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  RatingWeights rating_weights = uniform_rating_weights();
  /// Items recommended (and rated) per agent.
  std::size_t k = 5;
  std::size_t workers = 8;

  void validate() const;
  nlohmann::json to_json() const;
  static FluctuationConfig from_json(const nlohmann::json& j);
};

/// For each sample size n and each repeat, runs one recommender round with
/// ceil(n/k) agents on the stochastic mock and keeps the first n ratings. The
/// scenario seed is shared across repeats; the mock seed differs per repeat.
std::vector<FluctuationResult> run_fluctuation_experiment(const FluctuationConfig& config);

struct ScalingCell {
  std::size_t agents = 0;
  std::size_t concurrency = 0;
  double wall_time_ms = 0.0;
  /// ceil(agents / concurrency) * latency
  double model_ms = 0.0;

  nlohmann::json to_json() const;
};

struct ScalingConfig {
  std::vector<std::size_t> agent_counts{100, 200, 400};
  std::vector<std::size_t> concurrency_levels{2, 4, 8};
  LatencyModel latency{50.0, 0.0};
  std::uint64_t seed = 0;
  std::string scenario = "recommender";
  /// Run only these (agents, concurrency) pairs instead of the full grid.
  std::vector<std::pair<std::size_t, std::size_t>> cells;

  void validate() const;
  nlohmann::json to_json() const;
  static ScalingConfig from_json(const nlohmann::json& j);
};

/// One round per cell with the deterministic mock sleeping for the modeled
/// latency; `concurrency` sets both workers and the endpoint's slot count.
/// Population setup is outside the timed region.
std::vector<ScalingCell> run_scaling_benchmark(const ScalingConfig& config);

/// sample_size,repeat_count,v_sum,v_0.5,...,v_5.0
void write_fluctuation_csv(std::span<const FluctuationResult> results, const std::filesystem::path& path);
/// agents,concurrency,wall_time_ms
void write_scaling_csv(std::span<const ScalingCell> cells, const std::filesystem::path& path);

}  // namespace gensim
