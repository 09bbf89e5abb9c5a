// SPDX-License-Identifier: Apache-2.0
//
// Chat-completion backends: scripted replay, live HTTP, and decorators for
// retry and redacted logging.
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gestura {

inline constexpr std::string_view kDefaultModelId = "gpt-4-1106-preview";

enum class Role { System, User, Assistant };

std::string_view to_string(Role r);
Role parse_role(std::string_view s);  // Error{ParseError}

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct CompletionRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::string model_id = std::string(kDefaultModelId);

  /// Throws Error{InvalidArgument}.
  void validate() const;
};

struct UsageRecord {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double latency_s = 0.0;
  /// True when counts are estimated locally instead of reported by a provider.
  bool approximate = false;

  std::int64_t total_tokens() const { return input_tokens + output_tokens; }
  UsageRecord& operator+=(const UsageRecord& o);
};

struct Completion {
  std::string text;
  UsageRecord usage;
};

/// Implementations must accept concurrent calls.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual Completion complete(const CompletionRequest& request) = 0;
  /// Deterministic backends are never retried.
  virtual bool deterministic() const { return false; }
};

/// ceil(chars / 4)
std::int64_t approximate_tokens(std::string_view text);

/// Stable FNV-1a hash of roles and contents, rendered as 16 hex digits.
std::string message_hash(std::span<const ChatMessage> messages);

/// Replay backend. Fixture file: JSON array of
///   {"match": "sequence"|"hash", "hash"?: "<16 hex>", "response": "...",
///    "error"?: "transport"|"rate_limited"|"auth"}
/// Hash fixtures answer any request whose messages hash to `hash` and may be
/// reused; sequence fixtures are consumed in order. A fixture with "error"
/// raises that error class instead of answering.
class ScriptedBackend final : public ChatBackend {
 public:
  struct Fixture {
    bool by_hash = false;
    std::string hash;
    std::string response;
    std::string error;
  };

  explicit ScriptedBackend(std::vector<Fixture> fixtures);
  static ScriptedBackend parse(std::string_view json_text);  // Error{MalformedInput}

  /// Throws Error{FixtureExhausted} when no fixture answers the request.
  Completion complete(const CompletionRequest& request) override;
  bool deterministic() const override { return true; }

  std::size_t remaining_sequence() const;
  std::size_t calls() const;

 private:
  std::vector<Fixture> hashed_;
  std::vector<Fixture> sequence_;
  std::size_t next_ = 0;
  std::size_t calls_ = 0;
  mutable std::mutex mu_;
};

std::vector<ScriptedBackend::Fixture> parse_fixtures(std::string_view json_text);

struct RetryPolicy {
  int max_attempts = 4;
  double base_delay_s = 0.5;
  double max_delay_s = 8.0;
  std::uint64_t seed = 0;

  void validate() const;  // Error{InvalidArgument}
};

using Sleeper = std::function<void(double seconds)>;

/// Retries RateLimited and TransportError with exponential backoff and
/// jitter. AuthError and every other error propagate immediately.
class RetryingBackend final : public ChatBackend {
 public:
  RetryingBackend(std::shared_ptr<ChatBackend> inner, RetryPolicy policy, Sleeper sleeper = {});

  Completion complete(const CompletionRequest& request) override;
  bool deterministic() const override { return inner_->deterministic(); }

  /// Attempts made across all calls so far.
  std::size_t attempts() const { return attempts_.load(); }

 private:
  double next_delay(int attempt);

  std::shared_ptr<ChatBackend> inner_;
  RetryPolicy policy_;
  Sleeper sleeper_;
  std::atomic<std::size_t> attempts_{0};
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

std::shared_ptr<RetryingBackend> with_retry(std::shared_ptr<ChatBackend> inner, RetryPolicy policy,
                                            Sleeper sleeper = {});

/// Masks API keys ("sk-...") and bearer tokens.
std::string redact(std::string_view text);

/// Writes one JSON line per completion: model, message count, usage and,
/// only when `debug_bodies` is set, the redacted request and response text.
class LoggingBackend final : public ChatBackend {
 public:
  LoggingBackend(std::shared_ptr<ChatBackend> inner, std::ostream& sink, bool debug_bodies = false);

  Completion complete(const CompletionRequest& request) override;
  bool deterministic() const override { return inner_->deterministic(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::ostream& sink_;
  bool debug_bodies_;
  // Shared by all instances so several sessions may log to one sink.
  static std::mutex sink_mu_;
};

/// OpenAI-compatible endpoint configuration. File format:
/// {"provider_url", "model_id", "timeout_s", "api_key_env"}
struct HttpBackendConfig {
  std::string provider_url = "https://api.openai.com/v1/chat/completions";
  std::string model_id = std::string(kDefaultModelId);
  double timeout_s = 120.0;
  std::string api_key_env = "OPENAI_API_KEY";
};

HttpBackendConfig parse_http_config(std::string_view json_text);

/// Live backend. Reads the API key from the environment at construction and
/// throws Error{AuthError} when it is missing, before any network traffic.
/// HTTP 401/403 map to AuthError, 429 to RateLimited, other failures to
/// TransportError. Usage comes from the provider's response.
std::shared_ptr<ChatBackend> make_http_backend(const HttpBackendConfig& cfg);

}  // namespace gestura
