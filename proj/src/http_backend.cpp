#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"
#include "llmopt/error.hpp"
#include "llmopt/llm.hpp"

#include <cstdlib>
#include <regex>

namespace llmopt {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) {
    throw Error(ErrorCode::Config, "endpoint must be an http(s) URL: " + url);
  }
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

std::string excerpt(std::string_view body) {
  constexpr std::size_t kMax = 300;
  return std::string(body.substr(0, kMax)) + (body.size() > kMax ? "..." : "");
}

class GateLease {
 public:
  explicit GateLease(RequestGate* gate) : gate_(gate) {
    if (gate_) gate_->acquire();
  }
  ~GateLease() {
    if (gate_) gate_->release();
  }
  GateLease(const GateLease&) = delete;
  GateLease& operator=(const GateLease&) = delete;

 private:
  RequestGate* gate_;
};

}  // namespace

RequestGate::RequestGate(int capacity) : available_(capacity) {
  if (capacity < 1) throw Error(ErrorCode::Config, "request cap must be >= 1");
}

void RequestGate::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void RequestGate::release() {
  {
    std::lock_guard lock(mutex_);
    ++available_;
  }
  cv_.notify_one();
}

HttpBackend::HttpBackend(BackendConfig config, std::shared_ptr<RequestGate> gate)
    : config_(std::move(config)), gate_(std::move(gate)) {
  split_url(config_.endpoint);
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
      api_key_ = key;
    }
  }
}

std::string HttpBackend::request_body(const ChatRequest& request, int n) {
  nlohmann::json body;
  body["model"] = request.model;
  body["temperature"] = request.temperature;
  body["n"] = n;
  body["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) {
    body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
  }
  return body.dump();
}

std::vector<std::string> HttpBackend::parse_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Protocol, "response is not JSON: " + excerpt(body));
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array()) {
    throw Error(ErrorCode::Protocol, "response has no choices array: " + excerpt(body));
  }
  std::vector<std::string> replies;
  for (const auto& choice : j["choices"]) {
    const auto message = choice.find("message");
    if (message == choice.end() || !message->is_object() || !message->contains("content") ||
        !(*message)["content"].is_string()) {
      throw Error(ErrorCode::Protocol, "choice without message content: " + excerpt(body));
    }
    replies.push_back((*message)["content"].get<std::string>());
  }
  if (replies.empty()) {
    throw Error(ErrorCode::Protocol, "response has an empty choices array");
  }
  return replies;
}

Completion HttpBackend::complete(const ChatRequest& request) {
  const auto endpoint = split_url(config_.endpoint);
  httplib::Client client(endpoint.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!api_key_.empty()) {
    headers.emplace("Authorization", "Bearer " + api_key_);
  }

  // Some servers ignore `n`; keep asking until enough choices arrive.
  Completion out;
  nlohmann::json raw_requests = nlohmann::json::array();
  nlohmann::json raw_responses = nlohmann::json::array();
  int guard = 0;
  while (out.replies.size() < static_cast<std::size_t>(request.n)) {
    const int want = std::min<int>(request.n - static_cast<int>(out.replies.size()), config_.samples_per_call);
    const auto body = request_body(request, want);
    raw_requests.push_back(body);
    httplib::Result result = [&] {
      GateLease lease(gate_.get());
      return client.Post(endpoint.path, headers, body, "application/json");
    }();
    if (!result) {
      throw Error(ErrorCode::Transport, "request to " + config_.endpoint + " failed: " + httplib::to_string(result.error()));
    }
    raw_responses.push_back(result->body);
    if (result->status == 429 || result->status >= 500) {
      throw Error(ErrorCode::Transport, "HTTP " + std::to_string(result->status) + ": " + excerpt(result->body));
    }
    if (result->status != 200) {
      throw Error(ErrorCode::Protocol, "HTTP " + std::to_string(result->status) + ": " + excerpt(result->body));
    }
    for (auto& reply : parse_response(result->body)) {
      if (out.replies.size() < static_cast<std::size_t>(request.n)) out.replies.push_back(std::move(reply));
    }
    if (++guard > request.n) {
      throw Error(ErrorCode::Protocol, "server keeps returning fewer choices than requested");
    }
  }
  out.raw_request = raw_requests.size() == 1 ? raw_requests[0].get<std::string>() : raw_requests.dump();
  out.raw_response = raw_responses.size() == 1 ? raw_responses[0].get<std::string>() : raw_responses.dump();
  return out;
}

}  // namespace llmopt
