#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "typojack/b64.hpp"
#include "typojack/providers.hpp"

namespace typojack::providers {

namespace {

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string base_path;  // without trailing slash
};

ParsedUrl parse_endpoint(const std::string& endpoint) {
  std::string rest = endpoint;
  if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else if (rest.rfind("https://", 0) == 0) {
    raise(Errc::config_error, "https endpoints are not supported; use an http gateway");
  }
  ParsedUrl out;
  std::size_t slash = rest.find('/');
  std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  out.base_path = slash == std::string::npos ? "" : rest.substr(slash);
  if (!out.base_path.empty() && out.base_path.back() == '/') {
    out.base_path.pop_back();
  }
  std::size_t colon = hostport.find(':');
  if (colon == std::string::npos) {
    out.host = hostport;
  } else {
    out.host = hostport.substr(0, colon);
    out.port = std::stoi(hostport.substr(colon + 1));
  }
  if (out.host.empty()) {
    raise(Errc::config_error, "endpoint '" + endpoint + "' has no host");
  }
  return out;
}

struct GateGuard {
  RequestGate& gate;
  explicit GateGuard(RequestGate& g) : gate(g) { gate.acquire(); }
  ~GateGuard() { gate.release(); }
};

// POST with exponential backoff. Retries transport failures, 429 and 5xx;
// backoff delays strictly increase per attempt.
nlohmann::json post_json(const HttpOptions& options, ProviderMetrics& metrics,
                         const std::string& path, const nlohmann::json& body) {
  ParsedUrl url = parse_endpoint(options.endpoint);

  httplib::Headers headers;
  if (!options.auth_env.empty()) {
    const char* token = std::getenv(options.auth_env.c_str());
    if (token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  const std::string payload = body.dump();
  const int attempts = std::max(0, options.max_retries) + 1;
  const int base_ms = std::max(1, options.backoff_base_ms);
  std::string last_error;

  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      metrics.retries.fetch_add(1);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(base_ms << (attempt - 1)));
    }
    metrics.requests.fetch_add(1);

    httplib::Client client(url.host, url.port);
    client.set_connection_timeout(static_cast<time_t>(options.timeout_s), 0);
    client.set_read_timeout(static_cast<time_t>(options.timeout_s), 0);
    client.set_write_timeout(static_cast<time_t>(options.timeout_s), 0);

    auto res = client.Post(url.base_path + path, headers, payload,
                           "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      metrics.failures.fetch_add(1);
      raise(Errc::malformed_response,
            "provider returned status " + std::to_string(res->status));
    }
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) {
      metrics.failures.fetch_add(1);
      raise(Errc::malformed_response, "provider reply is not valid JSON");
    }
    return reply;
  }

  metrics.failures.fetch_add(1);
  if (last_error.rfind("status 429", 0) == 0) {
    raise(Errc::rate_limited, "provider rate limited after retries");
  }
  raise(Errc::transport, "provider unreachable after " +
                             std::to_string(attempts) +
                             " attempts: " + last_error);
}

nlohmann::json message_to_json(const ChatMessage& msg) {
  nlohmann::json m;
  m["role"] = msg.role;
  if (msg.image_png_b64.has_value()) {
    m["content"] = nlohmann::json::array(
        {{{"type", "text"}, {"text", msg.content}},
         {{"type", "image_url"},
          {"image_url",
           {{"url", "data:image/png;base64," + *msg.image_png_b64}}}}});
  } else {
    m["content"] = msg.content;
  }
  return m;
}

}  // namespace

HttpChatModel::HttpChatModel(HttpOptions options)
    : options_(std::move(options)), gate_(options_.max_in_flight) {}

std::string HttpChatModel::chat(const ChatExchange& exchange) {
  if (exchange.messages.empty()) {
    raise(Errc::invalid_argument, "chat exchange has no messages");
  }
  GateGuard guard(gate_);

  nlohmann::json body;
  body["model"] = options_.model;
  body["temperature"] = exchange.temperature;
  body["messages"] = nlohmann::json::array();
  for (const ChatMessage& msg : exchange.messages) {
    body["messages"].push_back(message_to_json(msg));
  }

  nlohmann::json reply = post_json(options_, metrics_, "/v1/chat/completions", body);
  if (!reply.contains("choices") || !reply["choices"].is_array() ||
      reply["choices"].empty()) {
    raise(Errc::malformed_response, "chat reply has no choices");
  }
  const nlohmann::json& first = reply["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    raise(Errc::malformed_response, "chat reply missing message content");
  }
  return first["message"]["content"].get<std::string>();
}

HttpEmbedder::HttpEmbedder(HttpOptions options)
    : options_(std::move(options)), gate_(options_.max_in_flight) {}

semantics::EmbeddingVector HttpEmbedder::embed(const std::string& text) {
  if (text.empty()) {
    raise(Errc::invalid_argument, "cannot embed empty text");
  }
  GateGuard guard(gate_);

  nlohmann::json body;
  body["model"] = options_.model;
  body["input"] = text;

  nlohmann::json reply = post_json(options_, metrics_, "/v1/embeddings", body);
  if (!reply.contains("data") || !reply["data"].is_array() ||
      reply["data"].empty() || !reply["data"][0].contains("embedding") ||
      !reply["data"][0]["embedding"].is_array()) {
    raise(Errc::malformed_response, "embeddings reply missing data[0].embedding");
  }
  semantics::EmbeddingVector v;
  for (const auto& x : reply["data"][0]["embedding"]) {
    if (!x.is_number()) {
      raise(Errc::malformed_response, "embedding contains a non-number");
    }
    v.values.push_back(x.get<double>());
  }
  if (v.values.empty() || v.norm() == 0.0) {
    raise(Errc::malformed_response, "embedding is empty or zero");
  }
  return v;
}

HttpCaptioner::HttpCaptioner(HttpOptions options) : chat_(std::move(options)) {}

std::string HttpCaptioner::caption(const CaptionRequest& request) {
  metrics_.requests.fetch_add(1);
  if (request.image == nullptr) {
    raise(Errc::invalid_argument, "caption request carries no image");
  }
  ChatExchange exchange;
  ChatMessage msg;
  msg.role = "user";
  msg.content = request.instruction;
  msg.image_png_b64 = b64_encode(imaging::encode_png(*request.image));
  exchange.messages.push_back(std::move(msg));
  exchange.temperature = 0.0;

  std::string reply = chat_.chat(exchange);
  if (reply.empty()) {
    raise(Errc::malformed_response, "caption reply is empty");
  }
  return reply;
}

}  // namespace typojack::providers
