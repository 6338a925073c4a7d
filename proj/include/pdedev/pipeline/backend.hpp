#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

namespace pdedev::pipeline {

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::string agent;  // generator, inspector1, debugger, inspector2
  int call = 1;       // 1-based call count of this agent within the attempt
  int attempt = 1;
  std::string system;
  std::vector<ChatMessage> messages;
};

// Must be callable from several attempts at once.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // BackendError on transport failure.
  virtual std::string complete(const ChatRequest& request) const = 0;
  virtual std::string describe() const = 0;
};

// Fixture directory of <agent>_<k>.txt files. A call k uses the file with
// the largest index not above k. When the directory has attempt_NN
// subdirectories, attempt N reads from attempt_NN (falling back to the root).
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(std::string dir);
  std::string complete(const ChatRequest& request) const override;
  std::string describe() const override { return "scripted:" + dir_; }
  // The file a request would be answered from, or "" if none.
  std::string fixture_for(const ChatRequest& request) const;

 private:
  std::string dir_;
};

// OpenAI-style chat completion endpoint.
struct HttpBackendOptions {
  std::string endpoint;  // full URL of the completions route
  std::string model;
  std::string api_key;
  int retries = 2;  // extra tries after transport errors, 5xx, 408 and 429
  std::chrono::milliseconds retry_delay{1000};
  std::chrono::seconds timeout{300};
};

class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options);
  std::string complete(const ChatRequest& request) const override;
  std::string describe() const override { return "http:" + options_.endpoint + "#" + options_.model; }

 private:
  HttpBackendOptions options_;
};

// Endpoint from LLM_API_URL, key from LLM_API_KEY. ConfigError when the key
// or the endpoint is missing.
HttpBackendOptions http_options_from_env(const std::string& model);

// Request body sent by HttpBackend.
std::string chat_request_json(const ChatRequest& request, const std::string& model);
// Text of the first choice. BackendError on a malformed body.
std::string parse_chat_response(const std::string& body);

}  // namespace pdedev::pipeline
