#include <cstdlib>

#include <httplib.h>

#include "gensim/error.hpp"
#include "gensim/llm.hpp"

namespace gensim {

using nlohmann::json;

namespace {

// Splits "scheme://host:port/prefix" into "scheme://host:port" and "/prefix".
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace

HttpChatBackend::HttpChatBackend(EndpointSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::tie(scheme_host_port_, path_prefix_) = split_base_url(spec_.base_url);
}

json HttpChatBackend::request_body(const ChatRequest& request, std::string_view model) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body{{"model", model},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

std::string HttpChatBackend::parse_response_body(std::string_view body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw ProtocolError("chat completion: response is not JSON");
  const auto* content = [&]() -> const json* {
    if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
      return nullptr;
    }
    const auto& choice = j["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) return nullptr;
    const auto& message = choice["message"];
    if (!message.contains("content") || !message["content"].is_string()) return nullptr;
    return &message["content"];
  }();
  if (!content) throw ProtocolError("chat completion: missing choices[0].message.content");
  return content->get<std::string>();
}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
  request.validate();
  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(spec_.timeout);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (const char* key = std::getenv("GENSIM_API_KEY"); key && *key) {
    client.set_bearer_token_auth(key);
  }

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(path_prefix_ + "/v1/chat/completions", request_body(request, spec_.model).dump(),
                         "application/json");
  const Millis elapsed = std::chrono::steady_clock::now() - start;
  if (!res) {
    throw BackendError(spec_.base_url + ": " + httplib::to_string(res.error()), true, spec_.base_url);
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(spec_.base_url + ": HTTP " + std::to_string(res->status), true, spec_.base_url);
  }
  std::string content;
  try {
    content = parse_response_body(res->body);
  } catch (const ProtocolError& e) {
    throw BackendError(spec_.base_url + ": " + e.what(), false, spec_.base_url);
  }
  ChatResponse out;
  out.token_estimate = estimate_tokens(content);
  out.content = std::move(content);
  out.latency = elapsed;
  out.backend_id = spec_.base_url;
  return out;
}

}  // namespace gensim
