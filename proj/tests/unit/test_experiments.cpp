#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "gensim/error.hpp"
#include "gensim/experiments.hpp"
#include "gensim/rng.hpp"

using namespace gensim;

namespace {

// Pairwise form of the population variance: sum_ij (x_i - x_j)^2 / (2 n^2).
double brute_sigma(const std::vector<double>& xs) {
  const auto n = static_cast<double>(xs.size());
  double acc = 0.0;
  for (double a : xs)
    for (double b : xs) acc += (a - b) * (a - b);
  return std::sqrt(acc / (2.0 * n * n));
}

RatingDistribution random_distribution(KeyedRng& rng) {
  RatingDistribution p{};
  double total = 0.0;
  for (auto& v : p) {
    v = rng.uniform();
    total += v;
  }
  for (auto& v : p) v /= total;
  return p;
}

}  // namespace

TEST_CASE("identical distributions do not fluctuate") {
  RatingDistribution p{};
  p[3] = 0.25;
  p[7] = 0.75;
  std::vector<RatingDistribution> ds(10, p);
  auto r = fluctuation(ds);
  CHECK(r.v_sum == 0.0);
  CHECK(r.repeats == 10);
}

TEST_CASE("three runs with complementary ratings") {
  std::vector<RatingDistribution> ds(3);
  const double a[3] = {0.5, 0.6, 0.7};
  for (int i = 0; i < 3; ++i) {
    ds[i][0] = a[i];
    ds[i][1] = 1.0 - a[i];
  }
  auto r = fluctuation(ds);
  CHECK(r.per_rating_v[0] == doctest::Approx(r.per_rating_v[1]).epsilon(1e-12));
  const double sigma = brute_sigma({0.5, 0.6, 0.7});
  CHECK(sigma == doctest::Approx(std::sqrt(0.02 / 3.0)).epsilon(1e-12));
  CHECK(r.v_sum == doctest::Approx(2.0 * sigma).epsilon(1e-12));
}

TEST_CASE("fluctuation preconditions") {
  std::vector<RatingDistribution> one(1);
  one[0][0] = 1.0;
  CHECK_THROWS_AS(fluctuation(one), ValidationError);
  std::vector<RatingDistribution> bad(2);
  bad[0][0] = 1.0;
  bad[1][0] = 0.5;
  CHECK_THROWS_AS(fluctuation(bad), ValidationError);
  CHECK_THROWS_AS(normalize(RatingHistogram{}), ValidationError);
}

TEST_CASE("fluctuation matches a brute-force sigma and ignores repeat order") {
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    KeyedRng rng({trial, 0xb0});
    const auto n = 2 + rng.below(15);
    std::vector<RatingDistribution> ds;
    for (std::size_t i = 0; i < n; ++i) ds.push_back(random_distribution(rng));
    auto r = fluctuation(ds);
    double sum = 0.0;
    for (std::size_t k = 0; k < kRatingCount; ++k) {
      std::vector<double> xs;
      for (auto& d : ds) xs.push_back(d[k]);
      CHECK(std::abs(r.per_rating_v[k] - brute_sigma(xs)) <= 1e-12);
      sum += r.per_rating_v[k];
    }
    CHECK(std::abs(r.v_sum - sum) <= 1e-12);
    std::reverse(ds.begin(), ds.end());
    std::swap(ds.front(), ds[n / 2]);
    CHECK(std::abs(fluctuation(ds).v_sum - r.v_sum) <= 1e-12);
  }
}

TEST_CASE("fluctuation experiment shrinks with sample size and is deterministic") {
  FluctuationConfig c;
  c.sample_sizes = {100, 1000};
  c.repeats = 6;
  c.seed = 4;
  auto a = run_fluctuation_experiment(c);
  auto b = run_fluctuation_experiment(c);
  REQUIRE(a.size() == 2);
  CHECK(a[0].v_sum == b[0].v_sum);
  CHECK(a[1].v_sum == b[1].v_sum);
  CHECK(a[1].v_sum < a[0].v_sum);
  CHECK(a[0].sample_size == 100);
}

TEST_CASE("degenerate weights never fluctuate") {
  FluctuationConfig c;
  c.sample_sizes = {30, 300};
  c.repeats = 3;
  c.rating_weights = RatingWeights{};
  c.rating_weights[0] = 1.0;
  for (const auto& r : run_fluctuation_experiment(c)) CHECK(r.v_sum == 0.0);
  c.repeats = 1;
  CHECK_THROWS_AS(run_fluctuation_experiment(c), ConfigError);
}

TEST_CASE("scaling benchmark reports one cell per pair") {
  ScalingConfig c;
  c.cells = {{8, 4}, {4, 4}};
  c.latency = LatencyModel{20.0, 0.0};
  auto cells = run_scaling_benchmark(c);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].model_ms == 40.0);
  CHECK(cells[0].wall_time_ms >= 40.0);
  CHECK(cells[1].model_ms == 20.0);
  CHECK(cells[1].wall_time_ms >= 20.0);
}

TEST_CASE("csv outputs") {
  auto dir = std::filesystem::temp_directory_path() / "gensim_exp_csv";
  FluctuationResult r;
  r.sample_size = 300;
  r.repeats = 10;
  r.v_sum = 0.25;
  write_fluctuation_csv(std::vector<FluctuationResult>{r}, dir / "fluctuation.csv");
  std::ifstream in(dir / "fluctuation.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header ==
        "sample_size,repeat_count,v_sum,v_0.5,v_1.0,v_1.5,v_2.0,v_2.5,v_3.0,v_3.5,v_4.0,v_4.5,v_5.0");
  CHECK(row.rfind("300,10,0.25,0", 0) == 0);
  write_scaling_csv(std::vector<ScalingCell>{{100, 8, 651.5, 650}}, dir / "scaling.csv");
  std::ifstream s(dir / "scaling.csv");
  std::getline(s, header);
  std::getline(s, row);
  CHECK(header == "agents,concurrency,wall_time_ms");
  CHECK(row == "100,8,651.5");
  std::filesystem::remove_all(dir);
}

TEST_CASE("bench configs parse") {
  auto f = FluctuationConfig::from_json({{"sample_sizes", {10, 20}}, {"repeats", 3}});
  CHECK(f.sample_sizes.size() == 2);
  CHECK_THROWS_AS(FluctuationConfig::from_json({{"repeats", 1}}), ConfigError);
  auto s = ScalingConfig::from_json({{"cells", {{10, 2}}}, {"latency_ms", 5}});
  CHECK(s.cells.size() == 1);
  CHECK(s.latency.mean_ms == 5.0);
  CHECK_THROWS_AS(ScalingConfig::from_json({{"agent_counts", {0}}}), ConfigError);
}
