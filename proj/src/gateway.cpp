#include "gensim/gateway.hpp"

#include "gensim/parallel.hpp"

namespace gensim {

using nlohmann::json;

json RetryPolicy::to_json() const { return json{{"budget", budget}, {"base_delay_ms", base_delay.count()}}; }

RetryPolicy RetryPolicy::from_json(const json& j) {
  RetryPolicy p;
  p.budget = j.value("budget", p.budget);
  p.base_delay = std::chrono::milliseconds(j.value("base_delay_ms", p.base_delay.count()));
  std::vector<std::string> errors;
  if (p.budget < 0) errors.push_back("retry.budget: must be >= 0");
  if (p.base_delay.count() < 0) errors.push_back("retry.base_delay_ms: must be >= 0");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return p;
}

Gateway::Gateway(std::vector<GatewayEndpoint> endpoints, RetryPolicy retry) : retry_(retry) {
  if (endpoints.empty()) throw ValidationError("gateway: at least one endpoint required");
  if (retry_.budget < 0) throw ValidationError("gateway: retry budget must be >= 0");
  for (auto& e : endpoints) {
    if (!e.backend) throw ValidationError("gateway: endpoint without backend");
    if (e.max_concurrent < 1) throw ValidationError("gateway: max_concurrent must be >= 1");
    total_concurrency_ += e.max_concurrent;
    endpoints_.push_back(Endpoint{std::move(e.backend), e.max_concurrent});
  }
}

ChatResponse Gateway::attempt_once(const ChatRequest& request, std::string& endpoint_id) {
  std::size_t chosen = 0;
  {
    std::unique_lock lock(mutex_);
    slot_freed_.wait(lock, [&] {
      bool found = false;
      for (std::size_t i = 0; i < endpoints_.size(); ++i) {
        const auto& e = endpoints_[i];
        if (e.in_flight >= e.max_concurrent) continue;
        if (!found || e.in_flight < endpoints_[chosen].in_flight) {
          chosen = i;
          found = true;
        }
      }
      return found;
    });
    auto& e = endpoints_[chosen];
    ++e.in_flight;
    e.peak_in_flight = std::max(e.peak_in_flight, e.in_flight);
    ++e.attempts;
    ++counters_.attempts;
  }
  auto& endpoint = endpoints_[chosen];
  endpoint_id = endpoint.backend->id();

  const auto start = std::chrono::steady_clock::now();
  auto release = [&](bool success, bool transient) {
    const Millis elapsed = std::chrono::steady_clock::now() - start;
    {
      std::lock_guard lock(mutex_);
      --endpoint.in_flight;
      ++counters_.latency_samples;
      counters_.total_latency_ms += elapsed.count();
      if (success) ++counters_.successes;
      if (transient) ++counters_.transient_failures;
    }
    slot_freed_.notify_all();
  };
  try {
    auto response = endpoint.backend->complete(request);
    release(true, false);
    return response;
  } catch (const BackendError& e) {
    release(false, e.retryable());
    throw;
  } catch (const Error&) {
    release(false, false);
    throw;
  } catch (const std::exception& e) {
    release(false, false);
    throw BackendError(e.what(), false, endpoint_id);
  }
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  std::string endpoint_id;
  try {
    return retry_with_backoff([&](int) { return attempt_once(request, endpoint_id); }, retry_.budget,
                              retry_.base_delay);
  } catch (...) {
    std::lock_guard lock(mutex_);
    ++counters_.terminal_failures;
    throw;
  }
}

std::vector<DispatchResult> Gateway::dispatch(std::span<const ChatRequest> requests, std::size_t lanes) {
  std::vector<DispatchResult> results(requests.size());
  if (lanes == 0) lanes = static_cast<std::size_t>(total_concurrency_);
  parallel_for(requests.size(), lanes, [&](std::size_t i) {
    try {
      results[i].response = complete(requests[i]);
      results[i].endpoint_id = results[i].response->backend_id;
    } catch (const BackendError& e) {
      results[i].error = e.what();
      results[i].endpoint_id = e.backend_id();
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });
  return results;
}

GatewayMetrics Gateway::metrics() const {
  std::lock_guard lock(mutex_);
  GatewayMetrics m = counters_;
  m.endpoints.clear();
  for (const auto& e : endpoints_) {
    m.endpoints.push_back(EndpointMetrics{e.backend->id(), e.max_concurrent, e.attempts, e.peak_in_flight});
  }
  return m;
}

namespace {

const char* kind_name(BackendConfig::Kind kind) {
  switch (kind) {
    case BackendConfig::Kind::mock_deterministic: return "mock_deterministic";
    case BackendConfig::Kind::mock_stochastic: return "mock_stochastic";
    case BackendConfig::Kind::http_openai_compatible: return "http_openai_compatible";
  }
  return "mock_deterministic";
}

}  // namespace

void BackendConfig::validate() const {
  std::vector<std::string> errors;
  if (kind == Kind::http_openai_compatible) {
    if (endpoints.empty()) errors.push_back("backend.endpoints: at least one endpoint required");
    for (const auto& e : endpoints) {
      try {
        e.validate();
      } catch (const ConfigError& ce) {
        errors.insert(errors.end(), ce.field_errors().begin(), ce.field_errors().end());
      }
    }
  } else {
    if (mock_endpoints < 1) errors.push_back("backend.endpoints: must be >= 1");
    if (mock_max_concurrent < 1) errors.push_back("backend.max_concurrent: must be >= 1");
  }
  if (kind == Kind::mock_stochastic) {
    try {
      validate_rating_weights(rating_weights);
    } catch (const ValidationError& e) {
      errors.push_back(std::string("backend.") + e.what());
    }
  }
  if (latency.mean_ms < 0.0 || latency.jitter_sigma < 0.0) {
    errors.push_back("backend.latency: values must be >= 0");
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

json BackendConfig::to_json() const {
  json j{{"kind", kind_name(kind)}, {"seed", seed}, {"latency", latency.to_json()}};
  if (kind == Kind::http_openai_compatible) {
    json eps = json::array();
    for (const auto& e : endpoints) eps.push_back(e.to_json());
    j["endpoints"] = std::move(eps);
  } else {
    j["endpoints"] = mock_endpoints;
    j["max_concurrent"] = mock_max_concurrent;
  }
  if (kind == Kind::mock_stochastic) j["rating_weights"] = rating_weights;
  return j;
}

BackendConfig BackendConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError({"backend: must be an object"});
  BackendConfig c;
  const auto kind = j.value("kind", std::string("mock_deterministic"));
  if (kind == "mock_deterministic") {
    c.kind = Kind::mock_deterministic;
  } else if (kind == "mock_stochastic") {
    c.kind = Kind::mock_stochastic;
  } else if (kind == "http_openai_compatible" || kind == "http") {
    c.kind = Kind::http_openai_compatible;
  } else {
    throw ConfigError({"backend.kind: unknown backend kind '" + kind + "'"});
  }
  c.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("latency")) c.latency = LatencyModel::from_json(j["latency"]);
  if (c.kind == Kind::http_openai_compatible) {
    for (const auto& e : j.value("endpoints", json::array())) {
      EndpointSpec spec;
      spec.base_url = e.value("base_url", "");
      spec.model = e.value("model", "");
      spec.max_concurrent = e.value("max_concurrent", 1);
      spec.timeout = std::chrono::milliseconds(e.value("timeout_ms", 60000));
      c.endpoints.push_back(std::move(spec));
    }
  } else {
    c.mock_endpoints = j.value("endpoints", 1);
    c.mock_max_concurrent = j.value("max_concurrent", 64);
  }
  if (j.contains("rating_weights")) {
    const auto& w = j["rating_weights"];
    if (!w.is_array() || w.size() != kRatingCount) {
      throw ConfigError({"backend.rating_weights: must be an array of 10 numbers"});
    }
    for (std::size_t i = 0; i < kRatingCount; ++i) c.rating_weights[i] = w[i].get<double>();
  }
  c.validate();
  return c;
}

std::shared_ptr<Gateway> make_gateway(const BackendConfig& config, const RetryPolicy& retry) {
  config.validate();
  std::vector<GatewayEndpoint> endpoints;
  switch (config.kind) {
    case BackendConfig::Kind::mock_deterministic:
      for (int i = 0; i < config.mock_endpoints; ++i) {
        endpoints.push_back({std::make_shared<DeterministicMock>(config.seed, config.latency,
                                                                 "mock-deterministic-" + std::to_string(i)),
                             config.mock_max_concurrent});
      }
      break;
    case BackendConfig::Kind::mock_stochastic:
      for (int i = 0; i < config.mock_endpoints; ++i) {
        endpoints.push_back({std::make_shared<StochasticMock>(config.seed, config.rating_weights, config.latency,
                                                              "mock-stochastic-" + std::to_string(i)),
                             config.mock_max_concurrent});
      }
      break;
    case BackendConfig::Kind::http_openai_compatible:
      for (const auto& spec : config.endpoints) {
        endpoints.push_back({std::make_shared<HttpChatBackend>(spec), spec.max_concurrent});
      }
      break;
  }
  return std::make_shared<Gateway>(std::move(endpoints), retry);
}

}  // namespace gensim
