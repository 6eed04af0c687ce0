#pragma once

// Backends and helpers shared by the test suites and the acceptance binary.

#include <atomic>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ssr/backends.hpp"
#include "ssr/gateway.hpp"

namespace ssr::testing {

/// Prompt family recognised from template wording, most specific first
/// (refinement prompts embed the CoT instruction, so CoT is last).
inline std::string family(const std::string& prompt) {
  static const std::pair<const char*, const char*> kPhrases[] = {
      {"confidence", "determine the confidence of the prediction"},
      {"refine-ssr", "address the specific issue identified"},
      {"intervention", "Continue the reasoning step by step from this point"},
      {"plan-refine", "was judged inadequate"},
      {"refine-normal", "meticulously addressing the judge's feedback"},
      {"verification", "act as an impartial judge"},
      {"decompose", "reasoning process into a series of"},
      {"solve-sub", "answer the next sub-question"},
      {"ensemble", "Compare then synthesize the best answer"},
      {"plan-judge", "Judge whether this high-level plan"},
      {"cot", "step by step"},
  };
  for (const auto& [name, phrase] : kPhrases)
    if (prompt.find(phrase) != std::string::npos) return name;
  return "unknown";
}

/// Replies computed by a callback; thread-safe as long as the callback is.
class FnBackend final : public Backend {
 public:
  using Reply = std::function<std::string(const ChatRequest&)>;
  explicit FnBackend(Reply reply) : reply_(std::move(reply)) {}

  ChatResponse send(const ChatRequest& request, int) override {
    ++calls;
    ChatResponse r;
    r.text = reply_(request);
    r.prompt_tokens = count_words(request.prompt_text());
    r.completion_tokens = count_words(r.text);
    r.backend_id = id();
    return r;
  }
  std::string id() const override { return "fn"; }

  std::atomic<int> calls{0};

 private:
  Reply reply_;
};

struct Recorded {
  std::string prompt;
  std::uint64_t sample_index = 0;
  std::uint32_t attempt = 0;
};

/// Forwards to an inner backend and keeps every request it saw.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

  ChatResponse send(const ChatRequest& request, int retry) override {
    {
      std::lock_guard lock(mutex_);
      log_.push_back({request.prompt_text(), request.sample_index, request.attempt});
    }
    return inner_->send(request, retry);
  }
  std::string id() const override { return "recording:" + inner_->id(); }

  std::vector<Recorded> log() const {
    std::lock_guard lock(mutex_);
    return log_;
  }
  std::vector<std::string> prompts_of(const std::string& fam) const {
    std::vector<std::string> out;
    for (const auto& r : log())
      if (family(r.prompt) == fam) out.push_back(r.prompt);
    return out;
  }

 private:
  std::shared_ptr<Backend> inner_;
  mutable std::mutex mutex_;
  std::vector<Recorded> log_;
};

inline MockScript script(std::initializer_list<std::pair<std::string, std::vector<std::string>>> rules) {
  MockScript s;
  for (const auto& [pattern, responses] : rules) s.rules.push_back({pattern, false, responses});
  return s;
}

inline GatewayConfig no_cache() {
  GatewayConfig c;
  c.cache_enabled = false;
  c.backoff_base = std::chrono::milliseconds(0);
  return c;
}

inline GatewayConfig memory_cache() {
  GatewayConfig c;
  c.backoff_base = std::chrono::milliseconds(0);
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("ssr-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Decomposition reply in the JSON shape the decompose template asks for.
inline std::string decomposition_reply(const std::vector<std::pair<std::string, std::string>>& steps) {
  std::string body = "Here is the breakdown.\n```json\n{\"sub-questions\": [";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) body += ", ";
    body += "{\"description\": \"" + steps[i].first + "\", \"answer\": \"" + steps[i].second + "\"}";
  }
  body += "], \"answer\": \"" + (steps.empty() ? std::string() : steps.back().second) + "\"}\n```";
  return body;
}

}  // namespace ssr::testing
