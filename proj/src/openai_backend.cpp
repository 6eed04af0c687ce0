#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ssr/backends.hpp"
#include "ssr/error.hpp"

namespace ssr {

using nlohmann::json;

OpenAiBackend::OpenAiBackend(OpenAiConfig config) : config_(std::move(config)) {
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw Error(ErrorCode::ConfigError, config_.api_key_env,
                  "environment variable " + config_.api_key_env + " holding the API key is not set");
    api_key_ = key;
  }
}

json OpenAiBackend::request_body(const ChatRequest& request, const std::string& model) {
  json messages = json::array();
  for (const auto& message : request.messages)
    messages.push_back({{"role", to_string(message.role)}, {"content", message.content}});
  return {{"model", request.model_id.empty() ? model : request.model_id},
          {"messages", std::move(messages)},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

ChatResponse OpenAiBackend::parse_body(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, "body", e.what());
  }
  const auto* choices = doc.contains("choices") ? &doc["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty())
    throw Error(ErrorCode::MalformedResponse, "/choices", "missing or empty");
  const auto& message = (*choices)[0].value("message", json::object());
  if (!message.contains("content") || !message["content"].is_string())
    throw Error(ErrorCode::MalformedResponse, "/choices/0/message/content", "missing");

  ChatResponse response;
  response.text = message["content"].get<std::string>();
  if (doc.contains("usage") && doc["usage"].is_object()) {
    response.prompt_tokens = doc["usage"].value("prompt_tokens", std::int64_t{0});
    response.completion_tokens = doc["usage"].value("completion_tokens", std::int64_t{0});
  }
  return response;
}

ChatResponse OpenAiBackend::send(const ChatRequest& request, int /*retry*/) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto body = request_body(request, config_.model_id).dump();
  auto result = client.Post(config_.path, headers, body, "application/json");
  if (!result)
    throw Error(ErrorCode::TransientFailure, httplib::to_string(result.error()),
                "transport error talking to " + config_.base_url);

  const int status = result->status;
  if (status == 429 || status >= 500)
    throw Error(ErrorCode::TransientFailure, "HTTP " + std::to_string(status));
  if (status != 200)
    throw Error(ErrorCode::BackendUnavailable, "HTTP " + std::to_string(status),
                result->body.substr(0, 512));

  ChatResponse response = parse_body(result->body);
  response.backend_id = id();
  return response;
}

}  // namespace ssr
