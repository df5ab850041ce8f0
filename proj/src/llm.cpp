#include "llmopt/llm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "llmopt/error.hpp"

namespace llmopt {

std::string_view role_name(Role role) noexcept {
  switch (role) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
  }
  return "user";
}

std::size_t estimate_tokens(std::string_view text) noexcept { return std::max<std::size_t>(1, (text.size() + 3) / 4); }

ChatMessage ChatMessage::make(Role role, std::string content) {
  if (content.empty()) {
    throw Error(ErrorCode::InvalidArgument, "chat message content must be non-empty");
  }
  const auto tokens = estimate_tokens(content);
  return ChatMessage{role, std::move(content), tokens};
}

ChatTranscript::ChatTranscript(std::size_t token_budget) : budget_(token_budget) {
  if (token_budget == 0) {
    throw Error(ErrorCode::Config, "token budget must be positive");
  }
}

void ChatTranscript::set_pinned_prefix_len(std::size_t n) {
  if (n > messages_.size()) {
    throw Error(ErrorCode::InvalidArgument, "pinned prefix longer than transcript");
  }
  pinned_ = n;
}

std::size_t ChatTranscript::total_tokens() const noexcept {
  std::size_t total = 0;
  for (const auto& m : messages_) total += m.token_estimate;
  return total;
}

void ChatTranscript::truncate() {
  std::size_t pinned_tokens = 0;
  for (std::size_t i = 0; i < pinned_; ++i) pinned_tokens += messages_[i].token_estimate;
  if (pinned_tokens > budget_) {
    throw Error(ErrorCode::Config, "pinned prefix needs " + std::to_string(pinned_tokens) +
                                       " tokens, budget is " + std::to_string(budget_));
  }
  std::size_t total = total_tokens();
  if (total <= budget_) return;

  const std::size_t protected_from = std::max(pinned_, messages_.size() >= 2 ? messages_.size() - 2 : 0);
  std::size_t end = pinned_;
  while (total > budget_ && end < protected_from) {
    total -= messages_[end].token_estimate;
    ++end;
  }
  if (total > budget_) {
    throw Error(ErrorCode::Config, "token budget " + std::to_string(budget_) +
                                       " cannot hold the pinned prefix plus the latest exchange (" +
                                       std::to_string(total) + " tokens)");
  }
  evicted_ += end - pinned_;
  messages_.erase(messages_.begin() + static_cast<std::ptrdiff_t>(pinned_),
                  messages_.begin() + static_cast<std::ptrdiff_t>(end));
}

ChatTranscript truncate(ChatTranscript transcript) {
  transcript.truncate();
  return transcript;
}

std::string_view backend_kind_name(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::Http:
      return "http";
    case BackendKind::Scripted:
      return "scripted";
    case BackendKind::PerfectOracle:
      return "perfect-oracle";
  }
  return "unknown";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "http") return BackendKind::Http;
  if (name == "scripted") return BackendKind::Scripted;
  if (name == "perfect-oracle" || name == "perfect_oracle") return BackendKind::PerfectOracle;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + std::string(name) + "'");
}

void BackendConfig::validate() const {
  if (!(temperature >= 0.0)) throw Error(ErrorCode::Config, "temperature must be >= 0");
  if (samples_per_call < 1) throw Error(ErrorCode::Config, "samples_per_call must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::Config, "max_retries must be >= 0");
  if (max_concurrent_requests < 1) throw Error(ErrorCode::Config, "max_concurrent_requests must be >= 1");
  if (kind == BackendKind::Http && endpoint.empty()) throw Error(ErrorCode::Config, "http backend needs an endpoint");
  if (kind == BackendKind::Scripted && script_path.empty()) {
    throw Error(ErrorCode::Config, "scripted backend needs a script file");
  }
}

// ---------------------------------------------------------------- scripted

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}

Completion ScriptedBackend::complete(const ChatRequest& request) {
  if (request.n < 1) {
    throw Error(ErrorCode::InvalidArgument, "n must be >= 1");
  }
  if (remaining() < static_cast<std::size_t>(request.n)) {
    next_ = replies_.size();
    throw Error(ErrorCode::ScriptExhausted, "script exhausted after " + std::to_string(replies_.size()) + " replies");
  }
  Completion out;
  for (int i = 0; i < request.n; ++i) {
    out.replies.push_back(replies_[next_++]);
  }
  return out;
}

Script Script::parse(std::string_view jsonl) {
  std::vector<Line> lines;
  std::istringstream in{std::string(jsonl)};
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      Line line;
      if (j.is_string()) {
        line.reply = j.get<std::string>();
      } else {
        line.reply = j.at("reply").get<std::string>();
        if (j.contains("task")) line.task = parse_task(j["task"].get<std::string>());
        if (j.contains("sample_id")) line.sample_id = j["sample_id"].get<std::string>();
        if (j.contains("trial")) line.trial = j["trial"].get<int>();
      }
      lines.push_back(std::move(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "script line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return Script(std::move(lines));
}

Script Script::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open script '" + path.string() + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::vector<std::string> Script::queue_for(TaskKind task, std::string_view sample_id, int trial) const {
  std::vector<std::string> out;
  for (const auto& line : lines_) {
    if (line.task && *line.task != task) continue;
    if (line.sample_id && *line.sample_id != sample_id) continue;
    if (line.trial && *line.trial != trial) continue;
    out.push_back(line.reply);
  }
  return out;
}

// ----------------------------------------------------------- perfect oracle

namespace {

std::string exact_tuple(const Solution& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.dim(); ++i) {
    if (i > 0) out += ", ";
    out += format_exact(s[i]);
  }
  return out + ")";
}

std::string exact_list(std::span<const Solution> points) {
  std::string out = "[";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0) out += ", ";
    out += exact_tuple(points[i]);
  }
  return out + "]";
}

const std::string& binding(const PromptContext& context, const char* name) {
  const auto it = context.bindings.find(name);
  if (it == context.bindings.end()) {
    throw Error(ErrorCode::Protocol, std::string(template_name(context.id)) + " prompt lacks binding '" + name + "'");
  }
  return it->second;
}

int parse_int_binding(const PromptContext& context, const char* name) {
  const auto& text = binding(context, name);
  try {
    return std::stoi(text);
  } catch (const std::exception&) {
    throw Error(ErrorCode::Protocol, std::string("binding '") + name + "' is not an integer: " + text);
  }
}

constexpr std::size_t kOracleListCap = 4096;

}  // namespace

PerfectOracleBackend::PerfectOracleBackend(ProblemInstance instance, TaskConfig config)
    : instance_(std::move(instance)),
      config_(config),
      grid_low_(config.grid_low),
      grid_high_(config.grid_high) {
  validate(instance_);
}

Solution PerfectOracleBackend::resolve(const std::string& text, const std::optional<Solution>& tracked) const {
  auto shown = parse_point(text, instance_.dim());
  if (tracked) {
    bool same = true;
    for (std::size_t i = 0; i < shown.dim(); ++i) {
      same = same && std::abs(shown[i] - (*tracked)[i]) <= 1e-6;
    }
    if (same) return *tracked;
  }
  return shown;
}

std::string PerfectOracleBackend::answer(const PromptContext& context) {
  const auto d = instance_.dim();
  switch (context.id) {
    case TemplateId::DefineLoss: {
      std::string formula = "1/" + std::to_string(d) + "[";
      for (std::size_t i = 0; i < d; ++i) {
        if (i > 0) formula += " + ";
        formula += "(^y" + std::to_string(i + 1) + "-" + format_real(instance_.y[i]) + ")^2";
      }
      formula += "]";
      return "The MSE loss function for the given data points (y1, y2, ...) = " + format_tuple(instance_.y) +
             " with respect to ^ys is: " + formula;
    }
    case TemplateId::GdStep: {
      const auto point = resolve(binding(context, "point"), gd_point_);
      gd_point_ = gd_step(instance_, point, config_.lr);
      return "Explanation : Lets think step by step. The gradient of the loss is (2/" + std::to_string(d) +
             ")(^y - y), so each coordinate moves against it scaled by the learning rate.\n"
             "Short Answer: After calculation, the next update point is (^y1_new, ^y2_new, ...) = " +
             exact_tuple(*gd_point_);
    }
    case TemplateId::HcGenerate: {
      hc_point_ = resolve(binding(context, "solution"), hc_point_);
      return "Explanation : Lets think step by step. Each neighbor adds 1 or subtracts 1 from one element.\n"
             "List : " +
             exact_list(hc_neighbors(*hc_point_));
    }
    case TemplateId::HcSelect: {
      if (!hc_point_) {
        throw Error(ErrorCode::Protocol, "HcSelect prompt before any HcGenerate prompt");
      }
      // A neighbor that does not improve on the current solution is not taken.
      hc_point_ = hc_step(instance_, *hc_point_).point;
      return "Explanation : Lets think step by step. Comparing the MSE loss of every neighbor.\n"
             "List : [" +
             exact_tuple(*hc_point_) + "]";
    }
    case TemplateId::GridCreate: {
      grid_low_ = parse_int_binding(context, "low_bound");
      grid_high_ = parse_int_binding(context, "high_bound");
      const auto count = grid_size(grid_low_, grid_high_, d, kOracleListCap);
      if (!count) {
        return "Explanation : Each ^y takes every integer from " + std::to_string(grid_low_) + " to " +
               std::to_string(grid_high_) + ", giving " + std::to_string(grid_high_ - grid_low_ + 1) + "^" +
               std::to_string(d) + " combinations, too many to list.";
      }
      return "Explanation : Lets think step by step. Every ^y takes each integer in the range.\nList : " +
             exact_list(grid_enumerate(grid_low_, grid_high_, d, kOracleListCap));
    }
    case TemplateId::GridSelect:
      return "Explanation : Lets think step by step. The loss separates per coordinate.\nList : [" +
             exact_tuple(grid_optimum(instance_, grid_low_, grid_high_)) + "]";
    case TemplateId::BlackBoxGuess:
      return "(^y1, ^y2,....) = " + exact_tuple(Solution(instance_.y));
  }
  throw Error(ErrorCode::Protocol, "unsupported prompt template");
}

Completion PerfectOracleBackend::complete(const ChatRequest& request) {
  if (request.context == nullptr) {
    throw Error(ErrorCode::Protocol, "perfect-oracle backend needs a prompt context");
  }
  Completion out;
  out.replies.assign(static_cast<std::size_t>(std::max(request.n, 1)), answer(*request.context));
  return out;
}

// -------------------------------------------------------------- send/sample

namespace {

Completion complete_with_retry(const ChatTranscript& transcript, ChatBackend& backend, const BackendConfig& config,
                               int n, const PromptContext* context) {
  ChatRequest request;
  request.messages = transcript.messages();
  request.context = context;
  request.n = n;
  request.model = config.model_name;
  request.temperature = config.temperature;
  for (int attempt = 0;; ++attempt) {
    try {
      auto completion = backend.complete(request);
      if (completion.replies.size() != static_cast<std::size_t>(n)) {
        throw Error(ErrorCode::Protocol, "backend returned " + std::to_string(completion.replies.size()) +
                                             " replies, expected " + std::to_string(n));
      }
      for (const auto& r : completion.replies) {
        if (r.empty()) throw Error(ErrorCode::Protocol, "backend returned an empty reply");
      }
      return completion;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Transport || attempt >= config.max_retries) {
        throw;
      }
      std::this_thread::sleep_for(config.backoff_base * (1LL << std::min(attempt, 20)));
    }
  }
}

}  // namespace

SampleResult sample_n(ChatTranscript transcript, std::string user_msg, ChatBackend& backend,
                      const BackendConfig& config, int n, const PromptContext* context) {
  if (n < 1) {
    throw Error(ErrorCode::InvalidArgument, "sample_n: n must be >= 1");
  }
  transcript.append(ChatMessage::make(Role::User, std::move(user_msg)));
  transcript.truncate();
  auto completion = complete_with_retry(transcript, backend, config, n, context);
  auto replies = completion.replies;
  return {std::move(replies), std::move(transcript), std::move(completion)};
}

ChatTranscript append_reply(ChatTranscript transcript, std::string reply) {
  transcript.append(ChatMessage::make(Role::Assistant, std::move(reply)));
  transcript.truncate();
  return transcript;
}

SendResult send(ChatTranscript transcript, std::string user_msg, ChatBackend& backend, const BackendConfig& config,
                const PromptContext* context) {
  auto sampled = sample_n(std::move(transcript), std::move(user_msg), backend, config, 1, context);
  auto reply = sampled.replies.front();
  auto updated = append_reply(std::move(sampled.transcript), reply);
  return {std::move(reply), std::move(updated), std::move(sampled.completion)};
}

}  // namespace llmopt
