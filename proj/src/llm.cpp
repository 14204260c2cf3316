#include "gensim/llm.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "gensim/directives.hpp"
#include "gensim/error.hpp"
#include "gensim/text.hpp"

namespace gensim {

using nlohmann::json;

const char* to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system: return "system";
    case ChatRole::user: return "user";
    case ChatRole::assistant: return "assistant";
  }
  return "user";
}

ChatRole chat_role_from_string(std::string_view s) {
  if (s == "system") return ChatRole::system;
  if (s == "user") return ChatRole::user;
  if (s == "assistant") return ChatRole::assistant;
  throw ValidationError("unknown chat role '" + std::string(s) + "'");
}

ChatRequest ChatRequest::from_prompt(std::string prompt) {
  ChatRequest r;
  r.messages.push_back({ChatRole::user, std::move(prompt)});
  return r;
}

void ChatRequest::validate() const {
  if (messages.empty()) throw ValidationError("chat request: at least one message required");
  if (!(temperature >= 0.0)) throw ValidationError("chat request: temperature must be >= 0");
  if (max_tokens <= 0) throw ValidationError("chat request: max_tokens must be positive");
}

std::uint64_t ChatRequest::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& m : messages) {
    h = text::fnv1a64(to_string(m.role), h);
    h = text::fnv1a64("\x1f", h);
    h = text::fnv1a64(m.content, h);
    h = text::fnv1a64("\x1e", h);
  }
  if (seed) h = mix_keys({h, *seed});
  return h;
}

std::string ChatRequest::prompt_text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += '\n';
    out += messages[i].content;
  }
  return out;
}

std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

double LatencyModel::sample_ms(KeyedRng& rng) const {
  if (mean_ms <= 0.0) return 0.0;
  if (jitter_sigma <= 0.0) return mean_ms;
  // Box-Muller; u1 kept away from zero.
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return mean_ms * std::exp(jitter_sigma * z - 0.5 * jitter_sigma * jitter_sigma);
}

json LatencyModel::to_json() const { return json{{"mean_ms", mean_ms}, {"jitter_sigma", jitter_sigma}}; }

LatencyModel LatencyModel::from_json(const json& j) {
  LatencyModel m;
  m.mean_ms = j.value("mean_ms", 0.0);
  m.jitter_sigma = j.value("jitter_sigma", 0.0);
  if (m.mean_ms < 0.0 || m.jitter_sigma < 0.0) throw ValidationError("latency: values must be >= 0");
  return m;
}

namespace {

constexpr std::string_view kPhrases[] = {
    "I think we should look at this more carefully before deciding.",
    "That sounds reasonable to me, and I would go along with it.",
    "I am not convinced; my own experience points the other way.",
    "Let us weigh the costs against what we would gain.",
    "I agree in part, but the details matter a lot here.",
    "My priority is stability for my family, so I lean cautious.",
    "I would rather try something new this time.",
    "It depends on what the others decide, honestly.",
};
constexpr std::size_t kPhraseCount = std::size(kPhrases);

std::string format_rating(double rating) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", rating);
  return buf;
}

// Picks what a reply looks like from the prompt's directives; `pick(n)` draws an
// index below n, `rate()` draws a rating and `fallback()` answers prompts that
// carry no directive.
template <typename Pick, typename Rate, typename Fallback>
std::string directed_reply(std::string_view prompt, Pick&& pick, Rate&& rate, Fallback&& fallback) {
  using namespace directives;
  if (auto mode = find_value(prompt, kJudge)) {
    if (*mode == "revise") {
      // The judged prompt is embedded between <prompt> tags.
      auto open = prompt.find("<prompt>\n");
      auto close = prompt.rfind("\n</prompt>");
      if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        auto inner = prompt.substr(open + 9, close - open - 9);
        if (auto action = canonical_action(inner)) return *action;
      }
      return "I would take a more measured approach and explain my reasoning.";
    }
    return "Score: " + std::to_string(pick(11));
  }
  if (auto roles = find_list(prompt, kDialogueRoles); roles && !roles->empty()) {
    std::size_t turns = roles->size() * 2;
    if (auto t = find_value(prompt, kTurns)) {
      if (auto n = first_integer(*t); n && *n > 0) turns = static_cast<std::size_t>(*n);
    }
    std::string out;
    for (std::size_t i = 0; i < turns; ++i) {
      if (i) out += '\n';
      out += (*roles)[i % roles->size()];
      out += ": ";
      out += kPhrases[pick(kPhraseCount)];
    }
    return out;
  }
  if (find_value(prompt, kSpeaker)) return std::string(kPhrases[pick(kPhraseCount)]);
  if (auto items = find_list(prompt, kRateItems)) {
    std::string out;
    for (const auto& item : *items) {
      if (!out.empty()) out += '\n';
      out += item + "=" + format_rating(rate());
    }
    return out;
  }
  if (auto choices = find_list(prompt, kChoices); choices && !choices->empty()) {
    return (*choices)[pick(choices->size())];
  }
  return fallback();
}

template <typename Pick>
std::string persona_reply(std::string_view prompt, Pick&& pick) {
  std::string speaker = "someone in this town";
  for (auto line : text::split_lines(prompt)) {
    auto t = text::trim(line);
    if (t.substr(0, 5) == "name:") {
      speaker = std::string(text::trim(t.substr(5)));
      break;
    }
  }
  return "As " + speaker + ", " + std::string(kPhrases[pick(kPhraseCount)]);
}

void simulate_latency(double ms) {
  if (ms > 0.0) std::this_thread::sleep_for(Millis(ms));
}

constexpr std::uint64_t kLatencyStream = 0x1a7e4c5e;

}  // namespace

DeterministicMock::DeterministicMock(std::uint64_t seed, LatencyModel latency, std::string id)
    : seed_(seed), latency_(latency), id_(std::move(id)) {}

ChatResponse DeterministicMock::complete(const ChatRequest& request) {
  request.validate();
  const auto h = request.hash();
  KeyedRng rng({seed_, h});
  const auto prompt = request.prompt_text();
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng.below(n)); };
  auto content = directed_reply(
      prompt, pick, [&] { return kRatingScale[rng.below(kRatingCount)]; },
      [&] { return persona_reply(prompt, pick); });
  KeyedRng latency_rng({seed_, h, kLatencyStream});
  const double ms = latency_.sample_ms(latency_rng);
  simulate_latency(ms);
  ChatResponse r;
  r.token_estimate = estimate_tokens(content);
  r.content = std::move(content);
  r.latency = Millis(ms);
  r.backend_id = id_;
  return r;
}

RatingWeights uniform_rating_weights() {
  RatingWeights w;
  w.fill(1.0 / static_cast<double>(kRatingCount));
  return w;
}

void validate_rating_weights(const RatingWeights& weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || std::isinf(w)) throw ValidationError("rating_weights: entries must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("rating_weights: entries must sum to 1");
}

StochasticMock::StochasticMock(std::uint64_t seed, RatingWeights rating_weights, LatencyModel latency,
                               std::string id)
    : seed_(seed), weights_(rating_weights), latency_(latency), id_(std::move(id)) {
  validate_rating_weights(weights_);
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

ChatResponse StochasticMock::complete(const ChatRequest& request) {
  request.validate();
  const auto h = request.hash();
  KeyedRng rng({seed_, h});
  auto rate = [&] {
    const double u = rng.uniform() * cumulative_.back();
    for (std::size_t i = 0; i < kRatingCount; ++i) {
      if (u < cumulative_[i] && weights_[i] > 0.0) return kRatingScale[i];
    }
    // Rounding at the top end: take the last rating with mass.
    for (std::size_t i = kRatingCount; i-- > 0;) {
      if (weights_[i] > 0.0) return kRatingScale[i];
    }
    return kRatingScale.front();
  };
  // Without a directive the reply is a single rating.
  auto content = directed_reply(
      request.prompt_text(), [&](std::size_t n) { return static_cast<std::size_t>(rng.below(n)); }, rate,
      [&] { return format_rating(rate()); });
  KeyedRng latency_rng({seed_, h, kLatencyStream});
  const double ms = latency_.sample_ms(latency_rng);
  simulate_latency(ms);
  ChatResponse r;
  r.token_estimate = estimate_tokens(content);
  r.content = std::move(content);
  r.latency = Millis(ms);
  r.backend_id = id_;
  return r;
}

FunctionBackend::FunctionBackend(Fn fn, std::string id) : fn_(std::move(fn)), id_(std::move(id)) {}

ChatResponse FunctionBackend::complete(const ChatRequest& request) {
  request.validate();
  const auto start = std::chrono::steady_clock::now();
  ChatResponse r;
  r.content = fn_(request);
  r.latency = std::chrono::steady_clock::now() - start;
  r.backend_id = id_;
  r.token_estimate = estimate_tokens(r.content);
  return r;
}

FaultInjectingBackend::FaultInjectingBackend(std::shared_ptr<Backend> inner, FaultConfig config)
    : inner_(std::move(inner)), config_(std::move(config)) {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!in_unit(config_.transient_failure_rate) || !in_unit(config_.malformed_rate)) {
    throw ValidationError("fault rates must lie in [0,1]");
  }
}

std::string FaultInjectingBackend::id() const { return inner_->id(); }

ChatResponse FaultInjectingBackend::complete(const ChatRequest& request) {
  const auto h = request.hash();
  if (config_.transient_failure_rate > 0.0) {
    std::uint64_t attempt;
    {
      std::lock_guard lock(mutex_);
      attempt = attempts_[h]++;
    }
    KeyedRng rng({config_.seed, h, attempt, 0xfa11});
    if (rng.uniform() < config_.transient_failure_rate) {
      ++injected_failures_;
      throw BackendError("injected transient failure", true, inner_->id());
    }
  }
  auto response = inner_->complete(request);
  if (config_.malformed_rate > 0.0) {
    KeyedRng rng({config_.seed, h, 0xbad});
    if (rng.uniform() < config_.malformed_rate) {
      ++malformed_;
      response.content = config_.malformed_reply;
      response.token_estimate = estimate_tokens(response.content);
    }
  }
  return response;
}

void EndpointSpec::validate() const {
  std::vector<std::string> errors;
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    errors.push_back("endpoint.base_url: must start with http:// or https://");
  }
  if (max_concurrent < 1) errors.push_back("endpoint.max_concurrent: must be >= 1");
  if (timeout.count() <= 0) errors.push_back("endpoint.timeout_ms: must be positive");
  if (!errors.empty()) throw ConfigError(std::move(errors));
}

json EndpointSpec::to_json() const {
  return json{{"base_url", base_url},
              {"model", model},
              {"max_concurrent", max_concurrent},
              {"timeout_ms", timeout.count()}};
}

EndpointSpec EndpointSpec::from_json(const json& j) {
  EndpointSpec e;
  e.base_url = j.value("base_url", "");
  e.model = j.value("model", "");
  e.max_concurrent = j.value("max_concurrent", 1);
  e.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
  e.validate();
  return e;
}

}  // namespace gensim
