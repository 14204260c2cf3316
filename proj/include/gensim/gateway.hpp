#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gensim/error.hpp"
#include "gensim/llm.hpp"

namespace gensim {

struct RetryPolicy {
  int budget = 3;
  std::chrono::milliseconds base_delay{100};

  nlohmann::json to_json() const;
  static RetryPolicy from_json(const nlohmann::json& j);
};

/// Calls `call(attempt)` until it succeeds, retrying retryable BackendErrors up
/// to `budget` times with delays base_delay * 2^attempt. Non-retryable errors
/// propagate immediately; an exhausted budget raises a terminal BackendError
/// that keeps the last cause's message and backend id.
template <typename Call>
auto retry_with_backoff(Call&& call, int budget, std::chrono::milliseconds base_delay)
    -> decltype(call(0)) {
  if (budget < 0) throw ValidationError("retry budget must be >= 0");
  for (int attempt = 0;; ++attempt) {
    try {
      return call(attempt);
    } catch (const BackendError& e) {
      if (!e.retryable()) throw;
      if (attempt >= budget) {
        throw BackendError("retry budget exhausted after " + std::to_string(attempt + 1) +
                               " attempts: " + e.what(),
                           false, e.backend_id());
      }
      std::this_thread::sleep_for(base_delay * (1LL << std::min(attempt, 30)));
    }
  }
}

struct GatewayEndpoint {
  std::shared_ptr<Backend> backend;
  int max_concurrent = 1;
};

struct EndpointMetrics {
  std::string id;
  int max_concurrent = 0;
  std::uint64_t attempts = 0;
  int peak_in_flight = 0;
};

struct GatewayMetrics {
  std::uint64_t attempts = 0;
  std::uint64_t successes = 0;
  std::uint64_t transient_failures = 0;
  std::uint64_t terminal_failures = 0;
  /// Measured wall latency per attempt, summed; one sample per attempt.
  std::uint64_t latency_samples = 0;
  double total_latency_ms = 0.0;
  std::vector<EndpointMetrics> endpoints;
};

struct DispatchResult {
  std::optional<ChatResponse> response;
  std::string error;
  std::string endpoint_id;

  bool ok() const noexcept { return response.has_value(); }
};

/// Shares calls across endpoints with per-endpoint concurrency caps. Each
/// attempt goes to the endpoint with the fewest calls in flight (ties to the
/// lowest index) and blocks while every endpoint is saturated.
class Gateway final : public Backend {
 public:
  Gateway(std::vector<GatewayEndpoint> endpoints, RetryPolicy retry = {});

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "gateway"; }

  /// Completes every request, returning results in request order. Failures are
  /// reported per position. `lanes` = 0 means the total concurrency.
  std::vector<DispatchResult> dispatch(std::span<const ChatRequest> requests, std::size_t lanes = 0);

  int total_concurrency() const noexcept { return total_concurrency_; }
  std::size_t endpoint_count() const noexcept { return endpoints_.size(); }
  const RetryPolicy& retry_policy() const noexcept { return retry_; }
  GatewayMetrics metrics() const;

 private:
  struct Slot;
  ChatResponse attempt_once(const ChatRequest& request, std::string& endpoint_id);

  struct Endpoint {
    std::shared_ptr<Backend> backend;
    int max_concurrent;
    int in_flight = 0;
    int peak_in_flight = 0;
    std::uint64_t attempts = 0;
  };

  std::vector<Endpoint> endpoints_;
  RetryPolicy retry_;
  int total_concurrency_ = 0;

  mutable std::mutex mutex_;
  std::condition_variable slot_freed_;
  GatewayMetrics counters_;
};

/// Backend selection as it appears in configuration files.
struct BackendConfig {
  enum class Kind { mock_deterministic, mock_stochastic, http_openai_compatible };

  Kind kind = Kind::mock_deterministic;
  std::uint64_t seed = 0;
  RatingWeights rating_weights = uniform_rating_weights();
  LatencyModel latency;
  /// Mock endpoints emulate a pool of model servers.
  int mock_endpoints = 1;
  int mock_max_concurrent = 64;
  std::vector<EndpointSpec> endpoints;

  void validate() const;
  nlohmann::json to_json() const;
  static BackendConfig from_json(const nlohmann::json& j);
};

std::shared_ptr<Gateway> make_gateway(const BackendConfig& config, const RetryPolicy& retry);

}  // namespace gensim
