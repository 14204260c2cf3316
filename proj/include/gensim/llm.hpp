#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gensim/rating.hpp"
#include "gensim/rng.hpp"

namespace gensim {

using Millis = std::chrono::duration<double, std::milli>;

enum class ChatRole { system, user, assistant };

const char* to_string(ChatRole role);
ChatRole chat_role_from_string(std::string_view s);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  int max_tokens = 512;
  std::optional<std::uint64_t> seed;

  /// A single user message carrying the whole prompt.
  static ChatRequest from_prompt(std::string prompt);

  void validate() const;
  /// Stable across platforms and runs.
  std::uint64_t hash() const;
  /// Message contents joined by newlines.
  std::string prompt_text() const;
};

struct ChatResponse {
  std::string content;
  /// Modeled latency for mocks, measured wall time for network backends.
  Millis latency{0};
  std::string backend_id;
  std::uint64_t token_estimate = 0;
};

std::uint64_t estimate_tokens(std::string_view text);

class Backend {
 public:
  virtual ~Backend() = default;

  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

/// Constant latency with optional mean-preserving lognormal jitter.
struct LatencyModel {
  double mean_ms = 0.0;
  double jitter_sigma = 0.0;

  double sample_ms(KeyedRng& rng) const;
  nlohmann::json to_json() const;
  static LatencyModel from_json(const nlohmann::json& j);
};

/// Content is a pure function of (messages, seed): a stable hash picks among
/// templated replies that follow any structured directive in the prompt.
class DeterministicMock final : public Backend {
 public:
  explicit DeterministicMock(std::uint64_t seed, LatencyModel latency = {},
                             std::string id = "mock-deterministic");

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return id_; }

 private:
  std::uint64_t seed_;
  LatencyModel latency_;
  std::string id_;
};

using RatingWeights = std::array<double, kRatingCount>;

RatingWeights uniform_rating_weights();
void validate_rating_weights(const RatingWeights& weights);

/// Draws ratings from fixed weights over the rating scale. Randomness is keyed
/// by (seed, request hash, draw index), so results do not depend on call order.
class StochasticMock final : public Backend {
 public:
  StochasticMock(std::uint64_t seed, RatingWeights rating_weights, LatencyModel latency = {},
                 std::string id = "mock-stochastic");

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return id_; }

 private:
  std::uint64_t seed_;
  RatingWeights weights_;
  std::array<double, kRatingCount> cumulative_{};
  LatencyModel latency_;
  std::string id_;
};

/// Adapts a callable into a backend. Useful for scripted tests and judges.
class FunctionBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;

  explicit FunctionBackend(Fn fn, std::string id = "function");

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return id_; }

 private:
  Fn fn_;
  std::string id_;
};

struct FaultConfig {
  /// Probability that an attempt throws a retryable BackendError.
  double transient_failure_rate = 0.0;
  /// Probability that a request's reply is replaced by `malformed_reply`.
  double malformed_rate = 0.0;
  std::uint64_t seed = 0;
  std::string malformed_reply = "I am not sure what to do.";
};

/// Wraps a backend and injects transient failures and malformed replies.
/// Failure draws are keyed by (seed, request hash, attempt number for that
/// request); malformed draws by (seed, request hash) only.
class FaultInjectingBackend final : public Backend {
 public:
  FaultInjectingBackend(std::shared_ptr<Backend> inner, FaultConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override;

  std::uint64_t injected_failures() const noexcept { return injected_failures_.load(); }
  std::uint64_t malformed_replies() const noexcept { return malformed_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  FaultConfig config_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, std::uint64_t> attempts_;
  std::atomic<std::uint64_t> injected_failures_{0};
  std::atomic<std::uint64_t> malformed_{0};
};

struct EndpointSpec {
  std::string base_url;
  std::string model;
  int max_concurrent = 1;
  std::chrono::milliseconds timeout{60000};

  void validate() const;
  nlohmann::json to_json() const;
  static EndpointSpec from_json(const nlohmann::json& j);
};

/// One OpenAI-compatible chat-completions endpoint. Timeouts, transport
/// failures and non-2xx statuses are retryable BackendErrors.
class HttpChatBackend final : public Backend {
 public:
  explicit HttpChatBackend(EndpointSpec spec);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return spec_.base_url; }

  /// Request body for POST {base_url}/v1/chat/completions.
  static nlohmann::json request_body(const ChatRequest& request, std::string_view model);
  /// Extracts choices[0].message.content; throws ProtocolError otherwise.
  static std::string parse_response_body(std::string_view body);

 private:
  EndpointSpec spec_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

}  // namespace gensim
