#include <fstream>
#include <regex>

#include <nlohmann/json.hpp>

#include "ssr/backends.hpp"
#include "ssr/error.hpp"

namespace ssr {

std::int64_t count_words(std::string_view text) {
  std::int64_t words = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

MockScript MockScript::from_json(const nlohmann::json& doc) {
  MockScript script;
  for (const auto& rule : doc.at("rules")) {
    MockRule parsed;
    parsed.pattern = rule.at("match").get<std::string>();
    parsed.regex = rule.value("regex", false);
    parsed.responses = rule.at("responses").get<std::vector<std::string>>();
    if (parsed.responses.empty())
      throw Error(ErrorCode::ConfigError, parsed.pattern, "mock rule has no responses");
    script.rules.push_back(std::move(parsed));
  }
  script.fallback_error_rate = doc.value("fallback_error_rate", 0.0);
  script.seed = doc.value("seed", std::uint64_t{0});
  if (script.fallback_error_rate < 0.0 || script.fallback_error_rate > 1.0)
    throw Error(ErrorCode::ConfigError, "fallback_error_rate", "must lie in [0,1]");
  return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, path.string(), "cannot open mock script");
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string(), e.what());
  }
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {}

ChatResponse MockBackend::send(const ChatRequest& request, int retry) {
  const std::string prompt = request.prompt_text();

  if (script_.fallback_error_rate > 0.0) {
    const std::string salt = std::to_string(script_.seed) + "|" +
                             std::to_string(request.sample_index) + "|" +
                             std::to_string(request.attempt) + "|" + std::to_string(retry) +
                             "|" + prompt;
    const double u = static_cast<double>(stable_hash64(salt) >> 11) * 0x1.0p-53;
    if (u < script_.fallback_error_rate)
      throw Error(ErrorCode::TransientFailure, "mock", "scripted transient failure");
  }

  for (const auto& rule : script_.rules) {
    const bool hit = rule.regex ? std::regex_search(prompt, std::regex(rule.pattern))
                                : prompt.find(rule.pattern) != std::string::npos;
    if (!hit) continue;
    const auto slot = (request.sample_index + request.attempt) % rule.responses.size();
    ChatResponse response;
    response.text = rule.responses[slot];
    response.prompt_tokens = count_words(prompt);
    response.completion_tokens = count_words(response.text);
    response.backend_id = id();
    return response;
  }
  throw Error(ErrorCode::BackendUnavailable, "mock", "no mock rule matches the prompt");
}

}  // namespace ssr
