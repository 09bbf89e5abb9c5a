// SPDX-License-Identifier: Apache-2.0
#include "gestura/llm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>

#include "gestura/error.hpp"

namespace gestura {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw Error(ErrorCode::ParseError, "unknown role '" + std::string(s) + "'");
}

void CompletionRequest::validate() const {
  if (messages.empty()) throw Error(ErrorCode::InvalidArgument, "completion request has no messages");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  for (const auto& m : messages) {
    if (m.role != Role::Assistant && m.content.empty()) {
      throw Error(ErrorCode::InvalidArgument, std::string(to_string(m.role)) + " message is empty");
    }
  }
}

UsageRecord& UsageRecord::operator+=(const UsageRecord& o) {
  input_tokens += o.input_tokens;
  output_tokens += o.output_tokens;
  latency_s += o.latency_s;
  approximate = approximate || o.approximate;
  return *this;
}

std::int64_t approximate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::string message_hash(std::span<const ChatMessage> messages) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto mix = [&h](std::string_view s) {
    for (const unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& m : messages) {
    mix(to_string(m.role));
    mix(std::string_view("\0", 1));
    mix(m.content);
    mix(std::string_view("\x1e", 1));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- scripted ---------------------------------------------------------------

std::vector<ScriptedBackend::Fixture> parse_fixtures(std::string_view json_text) {
  std::vector<ScriptedBackend::Fixture> out;
  try {
    const auto doc = json::parse(json_text);
    if (!doc.is_array()) throw Error(ErrorCode::MalformedInput, "fixture file must be a JSON array");
    for (const auto& f : doc) {
      ScriptedBackend::Fixture fx;
      const auto match = f.value("match", std::string("sequence"));
      if (match == "hash") {
        fx.by_hash = true;
        fx.hash = f.at("hash").get<std::string>();
      } else if (match != "sequence") {
        throw Error(ErrorCode::MalformedInput, "fixture match must be 'sequence' or 'hash'");
      }
      fx.response = f.value("response", std::string());
      fx.error = f.value("error", std::string());
      if (!fx.error.empty() && fx.error != "transport" && fx.error != "rate_limited" && fx.error != "auth") {
        throw Error(ErrorCode::MalformedInput, "unknown fixture error '" + fx.error + "'");
      }
      out.push_back(std::move(fx));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("fixtures: ") + e.what());
  }
  return out;
}

ScriptedBackend::ScriptedBackend(std::vector<Fixture> fixtures) {
  for (auto& f : fixtures) (f.by_hash ? hashed_ : sequence_).push_back(std::move(f));
}

ScriptedBackend ScriptedBackend::parse(std::string_view json_text) {
  return ScriptedBackend(parse_fixtures(json_text));
}

Completion ScriptedBackend::complete(const CompletionRequest& request) {
  request.validate();
  const Fixture* hit = nullptr;
  {
    std::lock_guard lock(mu_);
    ++calls_;
    if (!hashed_.empty()) {
      const auto h = message_hash(request.messages);
      for (const auto& f : hashed_) {
        if (f.hash == h) {
          hit = &f;
          break;
        }
      }
    }
    if (hit == nullptr) {
      if (next_ >= sequence_.size()) {
        throw Error(ErrorCode::FixtureExhausted,
                    "no fixture left after " + std::to_string(sequence_.size()) + " sequence responses");
      }
      hit = &sequence_[next_++];
    }
  }
  if (hit->error == "transport") throw Error(ErrorCode::TransportError, "scripted transport failure");
  if (hit->error == "rate_limited") throw Error(ErrorCode::RateLimited, "scripted rate limit");
  if (hit->error == "auth") throw Error(ErrorCode::AuthError, "scripted auth failure");

  Completion c;
  c.text = hit->response;
  for (const auto& m : request.messages) c.usage.input_tokens += approximate_tokens(m.content);
  c.usage.output_tokens = approximate_tokens(c.text);
  c.usage.latency_s = 0.0;
  c.usage.approximate = true;
  return c;
}

std::size_t ScriptedBackend::remaining_sequence() const {
  std::lock_guard lock(mu_);
  return sequence_.size() - next_;
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// --- retry ------------------------------------------------------------------

void RetryPolicy::validate() const {
  if (max_attempts < 1) throw Error(ErrorCode::InvalidArgument, "max_attempts must be >= 1");
  if (base_delay_s < 0.0 || max_delay_s < base_delay_s) {
    throw Error(ErrorCode::InvalidArgument, "retry delays must satisfy 0 <= base <= max");
  }
}

RetryingBackend::RetryingBackend(std::shared_ptr<ChatBackend> inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleeper_(std::move(sleeper)), rng_(policy.seed) {
  if (!inner_) throw Error(ErrorCode::InvalidArgument, "retry wrapper needs a backend");
  policy_.validate();
  if (!sleeper_) {
    sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

double RetryingBackend::next_delay(int attempt) {
  const double nominal = std::min(policy_.max_delay_s, policy_.base_delay_s * std::ldexp(1.0, attempt - 1));
  std::lock_guard lock(rng_mu_);
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  return nominal * jitter(rng_);
}

Completion RetryingBackend::complete(const CompletionRequest& request) {
  const int budget = inner_->deterministic() ? 1 : policy_.max_attempts;
  for (int attempt = 1;; ++attempt) {
    ++attempts_;
    try {
      return inner_->complete(request);
    } catch (const Error& e) {
      const bool transient = e.code() == ErrorCode::RateLimited || e.code() == ErrorCode::TransportError;
      if (!transient || attempt >= budget) throw;
    }
    sleeper_(next_delay(attempt));
  }
}

std::shared_ptr<RetryingBackend> with_retry(std::shared_ptr<ChatBackend> inner, RetryPolicy policy,
                                            Sleeper sleeper) {
  return std::make_shared<RetryingBackend>(std::move(inner), policy, std::move(sleeper));
}

// --- logging ----------------------------------------------------------------

std::string redact(std::string_view text) {
  static const std::regex key(R"(sk-[A-Za-z0-9_\-]{8,})");
  static const std::regex bearer(R"((Bearer\s+)[^\s"']+)", std::regex::icase);
  auto out = std::regex_replace(std::string(text), key, "sk-***");
  return std::regex_replace(out, bearer, "$1***");
}

std::mutex LoggingBackend::sink_mu_;

LoggingBackend::LoggingBackend(std::shared_ptr<ChatBackend> inner, std::ostream& sink, bool debug_bodies)
    : inner_(std::move(inner)), sink_(sink), debug_bodies_(debug_bodies) {
  if (!inner_) throw Error(ErrorCode::InvalidArgument, "logging wrapper needs a backend");
}

Completion LoggingBackend::complete(const CompletionRequest& request) {
  json line = {{"model", request.model_id}, {"messages", request.messages.size()}};
  try {
    auto c = inner_->complete(request);
    line["input_tokens"] = c.usage.input_tokens;
    line["output_tokens"] = c.usage.output_tokens;
    line["latency_s"] = c.usage.latency_s;
    if (debug_bodies_) {
      json msgs = json::array();
      for (const auto& m : request.messages) {
        msgs.push_back({{"role", to_string(m.role)}, {"content", redact(m.content)}});
      }
      line["request"] = msgs;
      line["response"] = redact(c.text);
    }
    std::lock_guard lock(sink_mu_);
    sink_ << line.dump() << '\n';
    return c;
  } catch (const Error& e) {
    line["error"] = redact(e.what());
    std::lock_guard lock(sink_mu_);
    sink_ << line.dump() << '\n';
    throw;
  }
}

}  // namespace gestura
