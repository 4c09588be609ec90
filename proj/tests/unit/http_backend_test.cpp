#include <gtest/gtest.h>

#include <thread>

#include "c4mas/http_backend.hpp"
#include "test_support.hpp"

namespace c4mas {
namespace {

using testing::error_code_of;

/// Local chat-completions endpoint answering with a configurable status/body.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      bodies_.push_back(req.body);
      auth_ = req.get_header_value("Authorization");
      auto [status, body, headers] = next_(bodies_.size() - 1);
      res.status = status;
      for (const auto& [k, v] : headers) res.set_header(k, v);
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  using Reply = std::tuple<int, std::string, std::vector<std::pair<std::string, std::string>>>;
  void respond(std::function<Reply(std::size_t)> fn) { next_ = std::move(fn); }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::string auth() {
    std::lock_guard lock(mutex_);
    return auth_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::vector<std::string> bodies_;
  std::string auth_;
  std::function<Reply(std::size_t)> next_ = [](std::size_t) {
    return Reply{200, "{}", {}};
  };
};

constexpr const char* kWireResponse = R"({
  "id": "chatcmpl-1",
  "object": "chat.completion",
  "choices": [{"index": 0, "message": {"role": "assistant", "content": "level: L1\nelements: []"},
               "finish_reason": "stop"}],
  "usage": {"prompt_tokens": 321, "completion_tokens": 54, "total_tokens": 375}
})";

LlmRequest sample_request() {
  AssembledPrompt p{"You are the Product Owner.", "Describe the system.",
                    std::string("Output schema.")};
  return {p, FixtureKey::generation(TaskKind::StructureYaml, {Level::L1_Context, std::nullopt})};
}

GenerationParams sample_params() {
  GenerationParams g;
  g.model_id = "gpt-test";
  g.temperature = 0.0;
  g.max_output_tokens = 4096;
  return g;
}

TEST(HttpBackendTest, GoldenRequestAndExactUsage) {
  FakeServer server;
  server.respond([](std::size_t) { return FakeServer::Reply{200, kWireResponse, {}}; });
  HttpBackend backend({server.base_url(), "sk-test"});
  auto c = backend.complete(sample_request(), sample_params());
  EXPECT_EQ(c.text, "level: L1\nelements: []");
  EXPECT_EQ(c.usage.input_tokens, 321u);
  EXPECT_EQ(c.usage.output_tokens, 54u);
  EXPECT_FALSE(c.usage_estimated);

  auto golden = nlohmann::json::parse(R"({
    "model": "gpt-test",
    "messages": [
      {"role": "system", "content": "You are the Product Owner."},
      {"role": "user", "content": "Describe the system.\n\n## Output format\n\nOutput schema."}
    ],
    "temperature": 0.0,
    "max_tokens": 4096
  })");
  ASSERT_EQ(server.bodies().size(), 1u);
  EXPECT_EQ(nlohmann::json::parse(server.bodies()[0]), golden);
  EXPECT_EQ(server.auth(), "Bearer sk-test");
}

TEST(HttpBackendTest, TooManyRequestsIsRateLimited) {
  FakeServer server;
  server.respond([](std::size_t) {
    return FakeServer::Reply{429, "{}", {{"Retry-After", "2"}}};
  });
  HttpBackend backend({server.base_url(), ""});
  try {
    backend.complete(sample_request(), sample_params());
    FAIL() << "expected RateLimited";
  } catch (const RateLimited& e) {
    EXPECT_EQ(e.retry_after(), std::chrono::milliseconds(2000));
  }
}

TEST(HttpBackendTest, GatewayRetriesAfterRateLimit) {
  FakeServer server;
  server.respond([](std::size_t i) {
    return i == 0 ? FakeServer::Reply{429, "{}", {}} : FakeServer::Reply{200, kWireResponse, {}};
  });
  LlmGateway gateway(std::make_shared<HttpBackend>(HttpBackendOptions{server.base_url(), ""}), 1,
                     RetryPolicy{3, std::chrono::milliseconds(5)});
  int sleeps = 0;
  gateway.set_sleeper([&](std::chrono::milliseconds) { ++sleeps; });
  auto c = gateway.complete(sample_request(), sample_params());
  EXPECT_EQ(c.usage.total(), 375u);
  EXPECT_EQ(sleeps, 1);
  EXPECT_EQ(server.bodies().size(), 2u);
}

TEST(HttpBackendTest, ServerErrorIsTransient) {
  FakeServer server;
  server.respond([](std::size_t) { return FakeServer::Reply{503, "{}", {}}; });
  HttpBackend backend({server.base_url(), ""});
  try {
    backend.complete(sample_request(), sample_params());
    FAIL() << "expected BackendUnavailable";
  } catch (const BackendUnavailable& e) {
    EXPECT_TRUE(e.transient());
  }
}

TEST(HttpBackendTest, ClientErrorIsPermanent) {
  FakeServer server;
  server.respond([](std::size_t) { return FakeServer::Reply{401, "{}", {}}; });
  HttpBackend backend({server.base_url(), ""});
  try {
    backend.complete(sample_request(), sample_params());
    FAIL() << "expected BackendUnavailable";
  } catch (const BackendUnavailable& e) {
    EXPECT_FALSE(e.transient());
  }
}

TEST(HttpBackendTest, UnreachableServerIsTransient) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/v1", ""});
  EXPECT_EQ(error_code_of([&] { backend.complete(sample_request(), sample_params()); }),
            ErrorCode::BackendUnavailable);
}

TEST(ChatResponseTest, MissingUsageFallsBackToEstimate) {
  auto req = sample_request();
  auto c = parse_chat_response(R"({"choices":[{"message":{"content":"abcdefgh"}}]})", req.prompt);
  EXPECT_TRUE(c.usage_estimated);
  EXPECT_EQ(c.usage.output_tokens, 2u);
  EXPECT_EQ(c.usage.input_tokens, estimate_usage(req.prompt, "").input_tokens);
}

TEST(ChatResponseTest, MalformedBodies) {
  auto prompt = sample_request().prompt;
  for (const char* body : {"not json", R"({"choices":[]})", R"({"choices":[{"message":{}}]})",
                           R"({"choices":[{"message":{"content":"  "}}]})"})
    EXPECT_EQ(error_code_of([&] { parse_chat_response(body, prompt); }),
              ErrorCode::MalformedResponse)
        << body;
}

TEST(HttpBackendTest, BaseUrlNeedsScheme) {
  EXPECT_EQ(error_code_of([] { HttpBackend({"localhost:8080", ""}); }), ErrorCode::ConfigError);
}

}  // namespace
}  // namespace c4mas
