#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ssr/gateway.hpp"

namespace ssr {

/// Scripted replies for desk-scale runs. The first rule whose matcher hits
/// the rendered prompt wins; its replies cycle with (sample_index + attempt).
struct MockRule {
  std::string pattern;
  bool regex = false;
  std::vector<std::string> responses;
};

struct MockScript {
  std::vector<MockRule> rules;
  // Probability that a try fails transiently (exercises gateway retries).
  double fallback_error_rate = 0.0;
  std::uint64_t seed = 0;

  static MockScript from_json(const nlohmann::json& doc);
  static MockScript load(const std::filesystem::path& path);
};

/// Whitespace-delimited word count; the mock and simulator token estimate.
std::int64_t count_words(std::string_view text);

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockScript script);

  ChatResponse send(const ChatRequest& request, int retry) override;
  std::string id() const override { return "mock"; }

 private:
  MockScript script_;
};

struct OpenAiConfig {
  // scheme://host[:port]
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model_id;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::seconds timeout{600};
};

/// OpenAI-style chat-completions over HTTP(S). Reads the bearer token from
/// the configured environment variable at construction.
class OpenAiBackend final : public Backend {
 public:
  explicit OpenAiBackend(OpenAiConfig config);

  ChatResponse send(const ChatRequest& request, int retry) override;
  std::string id() const override { return "openai:" + config_.model_id; }

  /// Wire payload for one request.
  static nlohmann::json request_body(const ChatRequest& request, const std::string& model);
  /// Throws Error(MalformedResponse) when the payload does not conform.
  static ChatResponse parse_body(const std::string& body);

 private:
  OpenAiConfig config_;
  std::string api_key_;
};

}  // namespace ssr
