#pragma once

// OpenAI-compatible chat-completions backend. Define CPPHTTPLIB_OPENSSL_SUPPORT
// before including (and link OpenSSL) to reach https endpoints.

#include <chrono>
#include <string>

#include "httplib.h"
#include "json.hpp"

#include "c4mas/error.hpp"
#include "c4mas/llm_gateway.hpp"

namespace c4mas {

struct HttpBackendOptions {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string api_key;
  std::chrono::seconds timeout{120};
};

/// Builds the request body: system + user messages, temperature, max_tokens.
inline nlohmann::json chat_request_body(const AssembledPrompt& prompt,
                                        const GenerationParams& params) {
  std::string user = prompt.user_text;
  if (prompt.schema_guide) user += "\n\n## Output format\n\n" + *prompt.schema_guide;
  return {{"model", params.model_id},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", prompt.system_text}},
                                  {{"role", "user"}, {"content", user}}})},
          {"temperature", params.temperature},
          {"max_tokens", params.max_output_tokens}};
}

/// Extracts text and usage from a chat-completions response body. Usage falls
/// back to the estimate when the response has none.
inline Completion parse_chat_response(std::string_view body, const AssembledPrompt& prompt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("response is not JSON: ") + e.what());
  }
  const nlohmann::json* content = nullptr;
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const auto& choice = j["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content"))
      content = &choice["message"]["content"];
  }
  if (!content || !content->is_string())
    throw Error(ErrorCode::MalformedResponse, "missing choices[0].message.content");
  Completion c;
  c.text = content->get<std::string>();
  if (text::trim_view(c.text).empty())
    throw Error(ErrorCode::MalformedResponse, "empty completion text");
  const auto usage = j.find("usage");
  if (usage != j.end() && usage->is_object() && usage->contains("prompt_tokens") &&
      usage->contains("completion_tokens")) {
    c.usage.input_tokens = (*usage)["prompt_tokens"].get<std::uint64_t>();
    c.usage.output_tokens = (*usage)["completion_tokens"].get<std::uint64_t>();
  } else {
    c.usage = estimate_usage(prompt, c.text);
    c.usage_estimated = true;
  }
  return c;
}

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
    auto scheme_end = options_.base_url.find("://");
    if (scheme_end == std::string::npos)
      throw Error(ErrorCode::ConfigError, "base_url must include a scheme: " + options_.base_url);
    auto path_start = options_.base_url.find('/', scheme_end + 3);
    origin_ = options_.base_url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : options_.base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  Completion complete(const LlmRequest& request, const GenerationParams& params) override {
    auto start = std::chrono::steady_clock::now();
    httplib::Client client(origin_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + options_.api_key);
    auto body = chat_request_body(request.prompt, params).dump();
    auto res = client.Post(prefix_ + "/chat/completions", headers, body, "application/json");
    if (!res)
      throw BackendUnavailable("request to " + origin_ + " failed: " + httplib::to_string(res.error()),
                               true);
    if (res->status == 429) {
      std::chrono::milliseconds retry_after{0};
      if (res->has_header("Retry-After")) {
        try {
          retry_after = std::chrono::milliseconds(
              static_cast<long long>(std::stod(res->get_header_value("Retry-After")) * 1000));
        } catch (const std::exception&) {
        }
      }
      throw RateLimited("rate limited by " + origin_, retry_after);
    }
    if (res->status < 200 || res->status >= 300) {
      bool transient = res->status >= 500 || res->status == 408;
      throw BackendUnavailable("HTTP " + std::to_string(res->status) + " from " + origin_,
                               transient);
    }
    auto c = parse_chat_response(res->body, request.prompt);
    c.backend_id = id();
    c.latency_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              start)
            .count());
    return c;
  }

  std::string id() const override { return "http:" + origin_; }

 private:
  HttpBackendOptions options_;
  std::string origin_;
  std::string prefix_;
};

}  // namespace c4mas
