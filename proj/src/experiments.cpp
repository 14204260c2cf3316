#include "gensim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "gensim/error.hpp"
#include "gensim/rng.hpp"
#include "gensim/simulation.hpp"

namespace gensim {

using nlohmann::json;

RatingDistribution normalize(const RatingHistogram& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  if (total <= 0.0) throw ValidationError("cannot normalize an empty rating histogram");
  RatingDistribution p{};
  for (std::size_t i = 0; i < kRatingCount; ++i) p[i] = static_cast<double>(counts[i]) / total;
  return p;
}

json FluctuationResult::to_json() const {
  return json{{"sample_size", sample_size}, {"repeats", repeats}, {"v_sum", v_sum}, {"per_rating_v", per_rating_v}};
}

FluctuationResult fluctuation(std::span<const RatingDistribution> distributions) {
  if (distributions.size() < 2) throw ValidationError("fluctuation needs at least two distributions");
  for (const auto& p : distributions) {
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw ValidationError("distribution entries must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("distribution does not sum to 1");
  }
  const auto n = static_cast<double>(distributions.size());
  FluctuationResult out;
  out.repeats = distributions.size();
  for (std::size_t r = 0; r < kRatingCount; ++r) {
    double mean = 0.0;
    for (const auto& p : distributions) mean += p[r];
    mean /= n;
    double ss = 0.0;
    for (const auto& p : distributions) ss += (p[r] - mean) * (p[r] - mean);
    out.per_rating_v[r] = std::sqrt(ss / n);
  }
  for (double v : out.per_rating_v) out.v_sum += v;
  return out;
}

// ---- fluctuation experiment ----

void FluctuationConfig::validate() const {
  std::vector<std::string> errors;
  if (sample_sizes.empty()) errors.push_back("sample_sizes: must not be empty");
  for (auto n : sample_sizes)
    if (n < 1) errors.push_back("sample_sizes: entries must be >= 1");
  if (repeats < 2) errors.push_back("repeats: must be >= 2");
  if (k < 1) errors.push_back("k: must be >= 1");
  if (workers < 1) errors.push_back("workers: must be >= 1");
  try {
    validate_rating_weights(rating_weights);
  } catch (const ValidationError& e) {
    errors.push_back(e.what());
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

json FluctuationConfig::to_json() const {
  return json{{"sample_sizes", sample_sizes}, {"repeats", repeats}, {"seed", seed},
              {"rating_weights", rating_weights}, {"k", k}, {"workers", workers}};
}

FluctuationConfig FluctuationConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError({"config: must be a JSON object"});
  FluctuationConfig c;
  try {
    c.sample_sizes = j.value("sample_sizes", c.sample_sizes);
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    c.rating_weights = j.value("rating_weights", c.rating_weights);
    c.k = j.value("k", c.k);
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw ConfigError({std::string("config: ") + e.what()});
  }
  c.validate();
  return c;
}

std::vector<FluctuationResult> run_fluctuation_experiment(const FluctuationConfig& config) {
  config.validate();
  std::vector<FluctuationResult> out;
  for (const auto n : config.sample_sizes) {
    std::vector<RatingDistribution> dists;
    for (std::size_t rep = 0; rep < config.repeats; ++rep) {
      SimulationConfig sc;
      sc.scenario = "recommender";
      sc.num_agents = (n + config.k - 1) / config.k;
      sc.rounds = 1;
      sc.seed = config.seed;
      sc.workers = config.workers;
      sc.memory.reflection_threshold = std::numeric_limits<double>::infinity();
      sc.scenario_params = json{{"k", config.k}};
      sc.backend.kind = BackendConfig::Kind::mock_stochastic;
      sc.backend.seed = mix_keys({config.seed, n, rep, 0xf1c});
      sc.backend.rating_weights = config.rating_weights;
      sc.backend.mock_max_concurrent = static_cast<int>(config.workers);
      Simulation sim(sc);
      const auto report = sim.run_round();
      if (report.aborted) throw BackendError("fluctuation run aborted: " + report.abort_reason.value_or(""), false);

      RatingHistogram counts{};
      std::size_t taken = 0;
      for (const auto& e : sim.events().all()) {
        if (e.error) continue;
        for (const auto& r : e.parsed.at("ratings")) {
          if (taken == n) break;
          ++counts[*rating_index(r.at("rating").get<double>())];
          ++taken;
        }
      }
      if (taken < n)
        throw ValidationError("only " + std::to_string(taken) + " of " + std::to_string(n) + " ratings were produced");
      dists.push_back(normalize(counts));
    }
    auto result = fluctuation(dists);
    result.sample_size = n;
    out.push_back(result);
  }
  return out;
}

// ---- scaling ----

json ScalingCell::to_json() const {
  return json{{"agents", agents}, {"concurrency", concurrency}, {"wall_time_ms", wall_time_ms}, {"model_ms", model_ms}};
}

void ScalingConfig::validate() const {
  std::vector<std::string> errors;
  if (cells.empty() && (agent_counts.empty() || concurrency_levels.empty()))
    errors.push_back("agent_counts/concurrency_levels: must not be empty");
  for (auto n : agent_counts)
    if (n < 1) errors.push_back("agent_counts: entries must be >= 1");
  for (auto c : concurrency_levels)
    if (c < 1) errors.push_back("concurrency_levels: entries must be >= 1");
  for (auto [n, c] : cells)
    if (n < 1 || c < 1) errors.push_back("cells: agents and concurrency must be >= 1");
  if (latency.mean_ms < 0.0) errors.push_back("latency_ms: must be >= 0");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

json ScalingConfig::to_json() const {
  json c = json::array();
  for (auto [n, k] : cells) c.push_back(json::array({n, k}));
  return json{{"agent_counts", agent_counts}, {"concurrency_levels", concurrency_levels},
              {"latency_ms", latency.mean_ms},  {"jitter_sigma", latency.jitter_sigma},
              {"seed", seed},                   {"scenario", scenario},
              {"cells", c}};
}

ScalingConfig ScalingConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError({"config: must be a JSON object"});
  ScalingConfig c;
  try {
    c.agent_counts = j.value("agent_counts", c.agent_counts);
    c.concurrency_levels = j.value("concurrency_levels", c.concurrency_levels);
    c.latency.mean_ms = j.value("latency_ms", c.latency.mean_ms);
    c.latency.jitter_sigma = j.value("jitter_sigma", c.latency.jitter_sigma);
    c.seed = j.value("seed", c.seed);
    c.scenario = j.value("scenario", c.scenario);
    if (j.contains("cells"))
      for (const auto& cell : j.at("cells")) c.cells.emplace_back(cell.at(0).get<std::size_t>(), cell.at(1).get<std::size_t>());
  } catch (const json::exception& e) {
    throw ConfigError({std::string("config: ") + e.what()});
  }
  c.validate();
  return c;
}

std::vector<ScalingCell> run_scaling_benchmark(const ScalingConfig& config) {
  config.validate();
  auto cells = config.cells;
  if (cells.empty())
    for (auto n : config.agent_counts)
      for (auto c : config.concurrency_levels) cells.emplace_back(n, c);

  std::vector<ScalingCell> out;
  for (auto [n, c] : cells) {
    SimulationConfig sc;
    sc.scenario = config.scenario;
    sc.num_agents = n;
    sc.rounds = 1;
    sc.seed = config.seed;
    sc.workers = c;
    sc.memory.reflection_threshold = std::numeric_limits<double>::infinity();
    sc.backend.kind = BackendConfig::Kind::mock_deterministic;
    sc.backend.seed = config.seed;
    sc.backend.latency = config.latency;
    sc.backend.mock_endpoints = 1;
    sc.backend.mock_max_concurrent = static_cast<int>(c);
    Simulation sim(sc);
    const auto report = sim.run_round();
    ScalingCell cell;
    cell.agents = n;
    cell.concurrency = c;
    cell.wall_time_ms = report.wall_time.count();
    cell.model_ms = static_cast<double>((report.tasks + c - 1) / c) * config.latency.mean_ms;
    out.push_back(cell);
  }
  return out;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void write_fluctuation_csv(std::span<const FluctuationResult> results, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "sample_size,repeat_count,v_sum";
  for (double r : kRatingScale) out << ",v_" << fmt(r).append(r == std::floor(r) ? ".0" : "");
  out << '\n';
  for (const auto& res : results) {
    out << res.sample_size << ',' << res.repeats << ',' << fmt(res.v_sum);
    for (double v : res.per_rating_v) out << ',' << fmt(v);
    out << '\n';
  }
}

void write_scaling_csv(std::span<const ScalingCell> cells, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "agents,concurrency,wall_time_ms\n";
  for (const auto& c : cells) out << c.agents << ',' << c.concurrency << ',' << fmt(c.wall_time_ms) << '\n';
}

}  // namespace gensim
