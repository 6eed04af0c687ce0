#include "ssr/gateway.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ssr/error.hpp"

namespace ssr {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw Error(ErrorCode::InvalidArgument, std::string(name), "unknown chat role");
}

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(ErrorCode::InvalidArgument, "messages", "empty");
  if (messages.front().role == Role::Assistant)
    throw Error(ErrorCode::InvalidArgument, "messages[0].role",
                "first message must be system or user");
  if (temperature < 0.0) throw Error(ErrorCode::InvalidArgument, "temperature");
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidArgument, "max_tokens");
}

std::string ChatRequest::prompt_text() const {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += "\n\n";
    out += messages[i].content;
  }
  return out;
}

ChatRequest ChatRequest::user(std::string content) {
  ChatRequest request;
  request.messages.push_back({Role::User, std::move(content)});
  return request;
}

SamplingProfile SamplingProfile::named(std::string_view name) {
  if (name == "general") return general();
  if (name == "reasoning") return reasoning();
  throw Error(ErrorCode::ConfigError, std::string(name),
              "temperature profile must be 'general' or 'reasoning'");
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("EVP_Digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::uint64_t stable_hash64(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr);
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value = (value << 8) | digest[i];
  return value;
}

std::string cache_key(const ChatRequest& request, bool sample_distinct) {
  json canonical;
  canonical["model_id"] = request.model_id;
  json messages = json::array();
  for (const auto& message : request.messages)
    messages.push_back({std::string(to_string(message.role)), message.content});
  canonical["messages"] = std::move(messages);
  canonical["temperature"] = request.temperature;
  canonical["max_tokens"] = request.max_tokens;
  canonical["attempt"] = request.attempt;
  if (sample_distinct) canonical["sample_index"] = request.sample_index;
  return sha256_hex(canonical.dump());
}

namespace {

json to_record(const std::string& key, const ChatResponse& response) {
  return {{"key", key},
          {"text", response.text},
          {"prompt_tokens", response.prompt_tokens},
          {"completion_tokens", response.completion_tokens},
          {"backend_id", response.backend_id}};
}

ChatResponse from_record(const json& record) {
  ChatResponse response;
  response.text = record.at("text").get<std::string>();
  response.prompt_tokens = record.at("prompt_tokens").get<std::int64_t>();
  response.completion_tokens = record.at("completion_tokens").get<std::int64_t>();
  response.backend_id = record.value("backend_id", "");
  return response;
}

}  // namespace

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<ChatResponse> ResponseCache::lookup(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  if (!dir_) return std::nullopt;
  std::ifstream in(*dir_ / key);
  if (!in) return std::nullopt;
  try {
    ChatResponse response = from_record(json::parse(in));
    std::lock_guard lock(mutex_);
    entries_.emplace(key, response);
    return response;
  } catch (const json::exception&) {
    // A torn write from an interrupted run; treat as a miss.
    return std::nullopt;
  }
}

void ResponseCache::store(const std::string& key, const ChatResponse& response) {
  ChatResponse stored = response;
  stored.cached = false;
  {
    std::lock_guard lock(mutex_);
    entries_.insert_or_assign(key, stored);
  }
  if (!dir_) return;
  // Write-then-rename; identical keys carry identical values, so the last
  // writer winning is harmless.
  std::ostringstream tag;
  tag << std::this_thread::get_id();
  const auto tmp = *dir_ / (key + ".tmp" + tag.str());
  {
    std::ofstream out(tmp);
    out << to_record(key, stored).dump();
  }
  std::filesystem::rename(tmp, *dir_ / key);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayConfig config)
    : backend_(std::move(backend)),
      config_(std::move(config)),
      cache_(config_.cache_enabled ? config_.cache_dir : std::nullopt),
      in_flight_(std::clamp(config_.max_in_flight, 1, 4096)) {
  if (!backend_) throw Error(ErrorCode::ConfigError, "backend", "no backend configured");
}

ChatResponse Gateway::call_backend(const ChatRequest& request) {
  if (config_.token_ceiling) {
    const auto spent = live_prompt_tokens_.load() + live_completion_tokens_.load();
    if (spent >= *config_.token_ceiling)
      throw Error(ErrorCode::BudgetExceeded, std::to_string(spent),
                  "token ceiling " + std::to_string(*config_.token_ceiling) + " reached");
  }

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<4096>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};

  for (int retry = 0;; ++retry) {
    try {
      ++backend_calls_;
      ChatResponse response = backend_->send(request, retry);
      response.cached = false;
      live_prompt_tokens_ += response.prompt_tokens;
      live_completion_tokens_ += response.completion_tokens;
      return response;
    } catch (const Error& error) {
      if (error.code() != ErrorCode::TransientFailure) throw;
      if (retry >= config_.max_retries)
        throw Error(ErrorCode::BackendUnavailable, backend_->id(),
                    "retries exhausted: " + std::string(error.what()));
      ++retries_;
      std::this_thread::sleep_for(config_.backoff_base * (1 << retry));
    }
  }
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  request.validate();
  if (!config_.cache_enabled) return call_backend(request);

  const std::string key = cache_key(request, config_.sample_distinct);
  if (auto hit = cache_.lookup(key)) {
    ++cached_calls_;
    hit->cached = true;
    return *hit;
  }

  std::promise<ChatResponse> promise;
  std::shared_future<ChatResponse> waiting;
  {
    std::lock_guard lock(pending_mutex_);
    if (auto it = pending_.find(key); it != pending_.end()) {
      waiting = it->second;
    } else {
      pending_.emplace(key, promise.get_future().share());
    }
  }
  if (waiting.valid()) {
    ChatResponse response = waiting.get();
    ++cached_calls_;
    response.cached = true;
    return response;
  }

  try {
    ChatResponse response = call_backend(request);
    cache_.store(key, response);
    promise.set_value(response);
    std::lock_guard lock(pending_mutex_);
    pending_.erase(key);
    return response;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(pending_mutex_);
    pending_.erase(key);
    throw;
  }
}

std::vector<ChatResponse> Gateway::complete_many(std::span<const ChatRequest> requests,
                                                 int parallelism) {
  if (parallelism < 1) throw Error(ErrorCode::InvalidArgument, "parallelism", "must be >= 1");
  std::vector<ChatResponse> responses(requests.size());
  if (requests.empty()) return responses;

  std::vector<std::exception_ptr> errors(requests.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        responses[i] = complete(requests[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };

  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism), requests.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (const auto& error : errors)
    if (error) std::rethrow_exception(error);
  return responses;
}

UsageCounters Gateway::usage() const {
  return {backend_calls_.load(), cached_calls_.load(), retries_.load(),
          live_prompt_tokens_.load(), live_completion_tokens_.load()};
}

}  // namespace ssr
