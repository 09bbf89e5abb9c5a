// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gestura/error.hpp"
#include "gestura/llm.hpp"

namespace gestura {
namespace {

using nlohmann::json;

CompletionRequest request(std::string user = "hello") {
  CompletionRequest r;
  r.messages = {{Role::System, "system prompt"}, {Role::User, std::move(user)}};
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::Io;
}

// Fails with `code` for the first `failures` calls, then answers "ok".
class FlakyBackend final : public ChatBackend {
 public:
  FlakyBackend(int failures, ErrorCode code, bool det = false) : failures_(failures), code_(code), det_(det) {}
  Completion complete(const CompletionRequest&) override {
    ++calls;
    if (calls <= failures_) throw Error(code_, "flaky");
    return {"ok", {}};
  }
  bool deterministic() const override { return det_; }
  int calls = 0;

 private:
  int failures_;
  ErrorCode code_;
  bool det_;
};

TEST(Llm, RequestValidation) {
  EXPECT_NO_THROW(request().validate());
  CompletionRequest empty;
  EXPECT_EQ(code_of([&] { empty.validate(); }), ErrorCode::InvalidArgument);
  auto r = request("");
  EXPECT_EQ(code_of([&] { r.validate(); }), ErrorCode::InvalidArgument);
  r = request();
  r.temperature = -1;
  EXPECT_EQ(code_of([&] { r.validate(); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(parse_role("assistant"), Role::Assistant);
  EXPECT_THROW(parse_role("tool"), Error);
}

TEST(Llm, UsageAccumulates) {
  UsageRecord a{10, 5, 0.5, false};
  a += UsageRecord{3, 2, 0.25, true};
  EXPECT_EQ(a.input_tokens, 13);
  EXPECT_EQ(a.output_tokens, 7);
  EXPECT_EQ(a.total_tokens(), 20);
  EXPECT_DOUBLE_EQ(a.latency_s, 0.75);
  EXPECT_TRUE(a.approximate);
  EXPECT_EQ(approximate_tokens(""), 0);
  EXPECT_EQ(approximate_tokens("abcde"), 2);
}

TEST(Llm, MessageHashIsStableAndSensitive) {
  const auto a = request();
  const auto h = message_hash(a.messages);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, message_hash(request().messages));
  EXPECT_NE(h, message_hash(request("hello!").messages));
  auto swapped = a.messages;
  swapped[0].role = Role::User;
  EXPECT_NE(h, message_hash(swapped));
}

TEST(Llm, ScriptedSequenceAndHash) {
  const auto r = request();
  const auto fx = parse_fixtures(json::array({{{"match", "hash"}, {"hash", message_hash(r.messages)}, {"response", "by hash"}},
                                              {{"match", "sequence"}, {"response", "first"}},
                                              {{"match", "sequence"}, {"response", "second"}}})
                                     .dump());
  ScriptedBackend b(fx);
  EXPECT_TRUE(b.deterministic());
  EXPECT_EQ(b.complete(r).text, "by hash");
  EXPECT_EQ(b.complete(r).text, "by hash");
  EXPECT_EQ(b.complete(request("other")).text, "first");
  const auto c = b.complete(request("x"));
  EXPECT_EQ(c.text, "second");
  EXPECT_TRUE(c.usage.approximate);
  EXPECT_EQ(c.usage.input_tokens, approximate_tokens("system prompt") + approximate_tokens("x"));
  EXPECT_EQ(c.usage.output_tokens, approximate_tokens("second"));
  EXPECT_EQ(b.remaining_sequence(), 0u);
  EXPECT_EQ(code_of([&] { b.complete(request("y")); }), ErrorCode::FixtureExhausted);
  EXPECT_EQ(b.calls(), 5u);
}

TEST(Llm, ScriptedErrorFixtures) {
  ScriptedBackend b(parse_fixtures(R"([{"match":"sequence","error":"transport"},
                                       {"match":"sequence","error":"rate_limited"},
                                       {"match":"sequence","error":"auth"}])"));
  EXPECT_EQ(code_of([&] { b.complete(request()); }), ErrorCode::TransportError);
  EXPECT_EQ(code_of([&] { b.complete(request()); }), ErrorCode::RateLimited);
  EXPECT_EQ(code_of([&] { b.complete(request()); }), ErrorCode::AuthError);
  EXPECT_THROW(parse_fixtures(R"([{"match":"sometimes","response":"x"}])"), Error);
  EXPECT_THROW(parse_fixtures(R"([{"match":"sequence","error":"gremlins"}])"), Error);
  EXPECT_THROW(parse_fixtures("{"), Error);
}

TEST(Llm, RetryBackoffAndJitter) {
  std::vector<double> delays;
  auto inner = std::make_shared<FlakyBackend>(3, ErrorCode::RateLimited);
  auto b = with_retry(inner, {4, 0.5, 8.0, 42}, [&](double s) { delays.push_back(s); });
  EXPECT_EQ(b->complete(request()).text, "ok");
  ASSERT_EQ(delays.size(), 3u);
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double nominal = 0.5 * static_cast<double>(1 << i);
    EXPECT_GE(delays[i], nominal * 0.5);
    EXPECT_LE(delays[i], nominal);
  }
  EXPECT_EQ(b->attempts(), 4u);

  // Same seed, same jitter.
  std::vector<double> again;
  auto b2 = with_retry(std::make_shared<FlakyBackend>(3, ErrorCode::RateLimited), {4, 0.5, 8.0, 42},
                       [&](double s) { again.push_back(s); });
  b2->complete(request());
  EXPECT_EQ(delays, again);
}

TEST(Llm, RetryGivesUpAndSkipsNonTransient) {
  auto transport = std::make_shared<FlakyBackend>(10, ErrorCode::TransportError);
  auto b = with_retry(transport, {3, 0.0, 0.0, 1}, [](double) {});
  EXPECT_EQ(code_of([&] { b->complete(request()); }), ErrorCode::TransportError);
  EXPECT_EQ(transport->calls, 3);

  auto auth = std::make_shared<FlakyBackend>(10, ErrorCode::AuthError);
  auto a = with_retry(auth, {3, 0.0, 0.0, 1}, [](double) {});
  EXPECT_EQ(code_of([&] { a->complete(request()); }), ErrorCode::AuthError);
  EXPECT_EQ(auth->calls, 1);

  // Deterministic backends are never retried.
  auto det = std::make_shared<FlakyBackend>(1, ErrorCode::RateLimited, true);
  auto d = with_retry(det, {5, 0.0, 0.0, 1}, [](double) {});
  EXPECT_EQ(code_of([&] { d->complete(request()); }), ErrorCode::RateLimited);
  EXPECT_EQ(det->calls, 1);

  EXPECT_THROW(with_retry(det, {0, 0.0, 0.0, 1}), Error);
  EXPECT_THROW(with_retry(det, {2, 2.0, 1.0, 1}), Error);
}

TEST(Llm, RedactsSecrets) {
  const auto r = redact("key sk-abcdefghijklmnop and Authorization: Bearer abc.def-123");
  EXPECT_EQ(r.find("abcdefghijklmnop"), std::string::npos);
  EXPECT_EQ(r.find("abc.def-123"), std::string::npos);
  EXPECT_NE(r.find("Bearer ***"), std::string::npos);
}

TEST(Llm, LoggingBackendWritesOneLinePerCall) {
  auto inner = std::make_shared<ScriptedBackend>(
      parse_fixtures(R"([{"match":"sequence","response":"reply sk-secretsecret1"},{"match":"sequence","error":"transport"}])"));
  std::ostringstream sink;
  LoggingBackend b(inner, sink, true);
  b.complete(request("my key is sk-0123456789abcdef"));
  EXPECT_THROW(b.complete(request()), Error);
  std::istringstream lines(sink.str());
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  const auto j1 = json::parse(first);
  EXPECT_EQ(j1.at("messages"), 2);
  EXPECT_EQ(j1.at("model"), std::string(kDefaultModelId));
  EXPECT_EQ(first.find("0123456789abcdef"), std::string::npos);
  EXPECT_EQ(first.find("secretsecret1"), std::string::npos);
  EXPECT_TRUE(json::parse(second).contains("error"));

  std::ostringstream quiet;
  LoggingBackend q(std::make_shared<ScriptedBackend>(parse_fixtures(R"([{"match":"sequence","response":"x"}])")), quiet);
  q.complete(request());
  EXPECT_FALSE(json::parse(quiet.str()).contains("request"));
}

TEST(Llm, HttpConfig) {
  const auto cfg = parse_http_config(R"({"model_id":"m","timeout_s":5,"api_key_env":"GESTURA_TEST_NO_SUCH_KEY"})");
  EXPECT_EQ(cfg.model_id, "m");
  EXPECT_EQ(cfg.provider_url, "https://api.openai.com/v1/chat/completions");
  EXPECT_THROW(parse_http_config(R"({"timeout_s":0})"), Error);
  EXPECT_EQ(code_of([&] { make_http_backend(cfg); }), ErrorCode::AuthError);
}

class LocalProvider : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = json::parse(req.body);
      last_auth = req.get_header_value("Authorization");
      res.status = status;
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    ::setenv("GESTURA_TEST_KEY", "sk-testtesttest", 1);
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  std::shared_ptr<ChatBackend> backend() {
    HttpBackendConfig cfg;
    cfg.provider_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    cfg.model_id = "test-model";
    cfg.timeout_s = 5;
    cfg.api_key_env = "GESTURA_TEST_KEY";
    return make_http_backend(cfg);
  }

  int status = 200;
  json reply = {{"choices", {{{"message", {{"content", "hi"}}}}}}, {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 3}}}};
  json last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST_F(LocalProvider, SendsModelAndReadsUsage) {
  auto r = request();
  r.temperature = 0.0;
  const auto c = backend()->complete(r);
  EXPECT_EQ(c.text, "hi");
  EXPECT_EQ(c.usage.input_tokens, 12);
  EXPECT_EQ(c.usage.output_tokens, 3);
  EXPECT_FALSE(c.usage.approximate);
  EXPECT_EQ(last_body.at("model"), "test-model");
  EXPECT_EQ(last_body.at("temperature"), 0.0);
  EXPECT_EQ(last_body.at("messages").size(), 2u);
  EXPECT_EQ(last_auth, "Bearer sk-testtesttest");
}

TEST_F(LocalProvider, ApproximatesMissingUsage) {
  reply.erase("usage");
  const auto c = backend()->complete(request());
  EXPECT_TRUE(c.usage.approximate);
  EXPECT_EQ(c.usage.output_tokens, approximate_tokens("hi"));
}

TEST_F(LocalProvider, StatusMapping) {
  for (const auto& [s, code] : {std::pair{401, ErrorCode::AuthError}, std::pair{403, ErrorCode::AuthError},
                                std::pair{429, ErrorCode::RateLimited}, std::pair{500, ErrorCode::TransportError}}) {
    status = s;
    EXPECT_EQ(code_of([&] { backend()->complete(request()); }), code) << s;
  }
  status = 200;
  reply = {{"unexpected", true}};
  EXPECT_EQ(code_of([&] { backend()->complete(request()); }), ErrorCode::TransportError);
}

}  // namespace
}  // namespace gestura
