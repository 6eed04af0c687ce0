#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssr {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

/// One backend exchange. `sample_index` distinguishes otherwise identical
/// parallel samples; `attempt` distinguishes a re-ask of the same prompt
/// after an unparseable answer so the re-ask never replays a cached reply.
struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.6;
  int max_tokens = 16384;
  std::uint64_t sample_index = 0;
  std::uint32_t attempt = 0;
  std::string model_id;

  /// Throws Error(InvalidArgument) when messages are empty, the first role is
  /// assistant, the temperature is negative or max_tokens is not positive.
  void validate() const;

  /// All message contents joined by blank lines; what mock matchers see.
  std::string prompt_text() const;

  static ChatRequest user(std::string content);
};

struct ChatResponse {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool cached = false;
  std::string backend_id;
};

/// A completion backend. `retry` is the transport retry ordinal for this
/// request (0 on the first try); implementations signal retryable failures
/// with Error(TransientFailure).
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse send(const ChatRequest& request, int retry) = 0;
  virtual std::string id() const = 0;
};

/// Default sampling parameters per model family.
struct SamplingProfile {
  double temperature = 0.6;
  int max_tokens = 16384;

  static SamplingProfile general() { return {0.6, 16384}; }
  static SamplingProfile reasoning() { return {1.0, 16384}; }
  static SamplingProfile named(std::string_view name);
};

struct GatewayConfig {
  bool cache_enabled = true;
  // sample_index is part of the cache key when set.
  bool sample_distinct = true;
  std::optional<std::filesystem::path> cache_dir;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{1000};
  // Ceiling on live (non-cached) prompt + completion tokens.
  std::optional<std::int64_t> token_ceiling;
  int max_in_flight = 16;
};

struct UsageCounters {
  std::int64_t backend_calls = 0;
  std::int64_t cached_calls = 0;
  std::int64_t retries = 0;
  std::int64_t live_prompt_tokens = 0;
  std::int64_t live_completion_tokens = 0;
};

/// Hex SHA-256 over the canonical serialization of (model_id, messages,
/// temperature, max_tokens, attempt, and sample_index when sample_distinct).
std::string cache_key(const ChatRequest& request, bool sample_distinct = true);

std::string sha256_hex(std::string_view data);

/// Deterministic 64-bit digest (leading bytes of SHA-256).
std::uint64_t stable_hash64(std::string_view data);

/// Content-addressed response store: an in-memory map in front of an
/// optional directory with one JSON file per hex digest.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

  std::optional<ChatResponse> lookup(const std::string& key);
  void store(const std::string& key, const ChatResponse& response);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mutex_;
  std::map<std::string, ChatResponse> entries_;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, GatewayConfig config = {});

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  ChatResponse complete(const ChatRequest& request);

  /// Responses are returned in request order. At most `parallelism` requests
  /// are in flight from this call. On failure the remaining queue is
  /// abandoned, in-flight requests drain, and the error of the lowest failing
  /// index is rethrown.
  std::vector<ChatResponse> complete_many(std::span<const ChatRequest> requests,
                                          int parallelism);

  UsageCounters usage() const;
  const GatewayConfig& config() const noexcept { return config_; }
  std::string backend_id() const { return backend_->id(); }

 private:
  ChatResponse call_backend(const ChatRequest& request);

  std::shared_ptr<Backend> backend_;
  GatewayConfig config_;
  ResponseCache cache_;
  std::counting_semaphore<4096> in_flight_;

  std::mutex pending_mutex_;
  std::map<std::string, std::shared_future<ChatResponse>> pending_;

  std::atomic<std::int64_t> backend_calls_{0};
  std::atomic<std::int64_t> cached_calls_{0};
  std::atomic<std::int64_t> retries_{0};
  std::atomic<std::int64_t> live_prompt_tokens_{0};
  std::atomic<std::int64_t> live_completion_tokens_{0};
};

}  // namespace ssr
