#include "pdedev/pipeline/backend.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <fmt/format.h>
#include <json.hpp>

#include "pdedev/error.hpp"

namespace pdedev::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

ScriptedBackend::ScriptedBackend(std::string dir) : dir_(std::move(dir)) {
  if (!fs::is_directory(dir_)) throw ConfigError("fixture directory not found: " + dir_);
}

std::string ScriptedBackend::fixture_for(const ChatRequest& request) const {
  std::vector<fs::path> roots;
  const fs::path attempt_dir = fs::path(dir_) / fmt::format("attempt_{:02d}", request.attempt);
  if (fs::is_directory(attempt_dir)) roots.push_back(attempt_dir);
  roots.emplace_back(dir_);
  for (const auto& root : roots) {
    for (int k = request.call; k >= 1; --k) {
      const fs::path p = root / fmt::format("{}_{}.txt", request.agent, k);
      if (fs::is_regular_file(p)) return p.string();
    }
  }
  return "";
}

std::string ScriptedBackend::complete(const ChatRequest& request) const {
  const std::string path = fixture_for(request);
  if (path.empty()) {
    throw BackendError(1, fmt::format("no fixture for {} call {} in {}", request.agent, request.call, dir_));
  }
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string chat_request_json(const ChatRequest& request, const std::string& model) {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", request.system}});
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return json{{"model", model}, {"messages", messages}}.dump();
}

std::string parse_chat_response(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw BackendError(1, "response is not JSON");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(1, std::string("unexpected response shape: ") + e.what());
  }
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ConfigError("http backend needs an endpoint");
  if (options_.api_key.empty()) throw ConfigError("http backend needs an API key");
  if (options_.retries < 0) throw ConfigError("retries must be >= 0");
}

std::string HttpBackend::complete(const ChatRequest& request) const {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(options_.endpoint, m, url)) throw ConfigError("bad endpoint URL: " + options_.endpoint);
  const std::string origin = m[1];
  const std::string path = m[2].matched ? m[2].str() : "/";
  const std::string body = chat_request_json(request, options_.model);
  const httplib::Headers headers = {{"Authorization", "Bearer " + options_.api_key}};

  std::string last_error;
  const int attempts = options_.retries + 1;
  for (int k = 0; k < attempts; ++k) {
    if (k > 0) std::this_thread::sleep_for(options_.retry_delay * k);
    httplib::Client client(origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(options_.timeout.count());
    client.set_write_timeout(30);
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = fmt::format("HTTP {}", res->status);
      // Client errors other than timeouts and rate limits will not improve.
      const bool retryable = res->status >= 500 || res->status == 408 || res->status == 429;
      if (!retryable) throw BackendError(k + 1, fmt::format("{} call {}: {}", request.agent, request.call, last_error));
      continue;
    }
    try {
      return parse_chat_response(res->body);
    } catch (const BackendError& e) {
      last_error = e.what();
    }
  }
  throw BackendError(attempts, fmt::format("{} call {}: {}", request.agent, request.call, last_error));
}

HttpBackendOptions http_options_from_env(const std::string& model) {
  HttpBackendOptions o;
  const char* key = std::getenv("LLM_API_KEY");
  const char* url = std::getenv("LLM_API_URL");
  if (key == nullptr || *key == '\0') throw ConfigError("LLM_API_KEY is not set");
  if (url == nullptr || *url == '\0') throw ConfigError("LLM_API_URL is not set");
  if (model.empty()) throw ConfigError("http backend needs a model name");
  o.api_key = key;
  o.endpoint = url;
  o.model = model;
  return o;
}

}  // namespace pdedev::pipeline
