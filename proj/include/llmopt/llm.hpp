#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmopt/core.hpp"
#include "llmopt/oracles.hpp"
#include "llmopt/prompts.hpp"

namespace llmopt {

enum class Role { System, User, Assistant };

[[nodiscard]] std::string_view role_name(Role role) noexcept;

/// chars/4, rounded up, at least 1.
[[nodiscard]] std::size_t estimate_tokens(std::string_view text) noexcept;

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  std::size_t token_estimate = 0;

  /// Throws InvalidArgument on empty content.
  [[nodiscard]] static ChatMessage make(Role role, std::string content);
};

inline constexpr std::size_t kDefaultTokenBudget = 14000;

/// Conversation history with a pinned prefix that truncation never evicts.
class ChatTranscript {
 public:
  explicit ChatTranscript(std::size_t token_budget = kDefaultTokenBudget);

  void append(ChatMessage message) { messages_.push_back(std::move(message)); }
  /// Pins every message currently in the transcript.
  void pin_all() { pinned_ = messages_.size(); }
  void set_pinned_prefix_len(std::size_t n);

  [[nodiscard]] const std::vector<ChatMessage>& messages() const noexcept { return messages_; }
  [[nodiscard]] std::size_t pinned_prefix_len() const noexcept { return pinned_; }
  [[nodiscard]] std::size_t token_budget() const noexcept { return budget_; }
  [[nodiscard]] std::size_t total_tokens() const noexcept;
  [[nodiscard]] std::size_t evicted() const noexcept { return evicted_; }

  /// In-place form of truncate().
  void truncate();

 private:
  std::vector<ChatMessage> messages_;
  std::size_t pinned_ = 0;
  std::size_t budget_;
  std::size_t evicted_ = 0;
};

/// Evicts the oldest unpinned messages until the transcript fits its budget.
/// The final two messages (latest exchange) are never evicted. Throws
/// ErrorCode::Config when the pinned prefix, or the prefix plus the latest
/// exchange, cannot fit.
[[nodiscard]] ChatTranscript truncate(ChatTranscript transcript);

enum class BackendKind { Http, Scripted, PerfectOracle };

[[nodiscard]] std::string_view backend_kind_name(BackendKind kind) noexcept;
/// "http", "scripted", "perfect-oracle" (underscore form accepted too).
[[nodiscard]] BackendKind parse_backend_kind(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::PerfectOracle;
  std::string model_name = "gpt-3.5-turbo-0613";
  double temperature = 0.8;
  int samples_per_call = 8;  // largest `n` per HTTP request
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_concurrent_requests = 4;
  std::filesystem::path script_path;

  void validate() const;
};

/// Template and bindings behind a user message. Backends that model the
/// task (the perfect oracle) read these instead of re-parsing prose.
struct PromptContext {
  TemplateId id = TemplateId::DefineLoss;
  Bindings bindings;
};

struct ChatRequest {
  std::span<const ChatMessage> messages;
  const PromptContext* context = nullptr;
  int n = 1;
  std::string_view model;
  double temperature = 0.0;
};

struct Completion {
  std::vector<std::string> replies;
  std::string raw_request;   // wire payload, HTTP only
  std::string raw_response;  // wire payload, HTTP only
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Returns exactly request.n replies. Throws ErrorCode::Transport for
  /// retryable failures and ErrorCode::Protocol for malformed responses.
  virtual Completion complete(const ChatRequest& request) = 0;
  [[nodiscard]] virtual BackendKind kind() const noexcept = 0;
};

/// Replays a fixed queue of replies.
class ScriptedBackend final : public ChatBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies);

  Completion complete(const ChatRequest& request) override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::Scripted; }
  [[nodiscard]] std::size_t remaining() const noexcept { return replies_.size() - next_; }

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

/// Script file: JSON lines, each either a bare string or
/// {"reply": ..., "task"?: ..., "sample_id"?: ..., "trial"?: ...}.
/// A trial's queue is every line whose present keys all match it, in file order.
class Script {
 public:
  struct Line {
    std::string reply;
    std::optional<TaskKind> task;
    std::optional<std::string> sample_id;
    std::optional<int> trial;
  };

  Script() = default;
  explicit Script(std::vector<Line> lines) : lines_(std::move(lines)) {}

  [[nodiscard]] static Script load(const std::filesystem::path& path);
  [[nodiscard]] static Script parse(std::string_view jsonl);

  [[nodiscard]] std::vector<std::string> queue_for(TaskKind task, std::string_view sample_id, int trial) const;
  [[nodiscard]] const std::vector<Line>& lines() const noexcept { return lines_; }

 private:
  std::vector<Line> lines_;
};

/// Answers every prompt with the exact oracle result, in the reference answer
/// formats. It tracks the exact iterate so printed rounding never leaks into
/// the trajectory. One instance per trial.
class PerfectOracleBackend final : public ChatBackend {
 public:
  PerfectOracleBackend(ProblemInstance instance, TaskConfig config);

  Completion complete(const ChatRequest& request) override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::PerfectOracle; }

  /// Reply text for one prompt; exposed for tests.
  [[nodiscard]] std::string answer(const PromptContext& context);

 private:
  Solution resolve(const std::string& binding, const std::optional<Solution>& tracked) const;

  ProblemInstance instance_;
  TaskConfig config_;
  std::optional<Solution> gd_point_;
  std::optional<Solution> hc_point_;
  int grid_low_;
  int grid_high_;
};

/// Process-wide cap on in-flight HTTP requests.
class RequestGate {
 public:
  explicit RequestGate(int capacity);

  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

/// OpenAI-style chat-completion client:
/// POST {model, temperature, n, messages:[{role, content}]} -> choices[].message.content.
class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(BackendConfig config, std::shared_ptr<RequestGate> gate);

  Completion complete(const ChatRequest& request) override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::Http; }

  /// Request body for the wire; the API key is never part of it.
  [[nodiscard]] static std::string request_body(const ChatRequest& request, int n);
  /// Extracts choices[].message.content, throwing Protocol on a bad shape.
  [[nodiscard]] static std::vector<std::string> parse_response(std::string_view body);

 private:
  BackendConfig config_;
  std::shared_ptr<RequestGate> gate_;
  std::string api_key_;
};

struct SendResult {
  std::string reply;
  ChatTranscript transcript;
  Completion completion;
};

/// Appends `user_msg`, truncates, queries the backend (retrying transport
/// failures with exponential backoff), appends the reply and truncates again.
[[nodiscard]] SendResult send(ChatTranscript transcript, std::string user_msg, ChatBackend& backend,
                              const BackendConfig& config, const PromptContext* context = nullptr);

struct SampleResult {
  std::vector<std::string> replies;
  ChatTranscript transcript;  // user message appended, no reply yet
  Completion completion;
};

/// n completions of one prompt. The caller picks one and passes it to append_reply().
[[nodiscard]] SampleResult sample_n(ChatTranscript transcript, std::string user_msg, ChatBackend& backend,
                                    const BackendConfig& config, int n, const PromptContext* context = nullptr);

[[nodiscard]] ChatTranscript append_reply(ChatTranscript transcript, std::string reply);

}  // namespace llmopt
