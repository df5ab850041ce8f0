#include <atomic>
#include <cstdlib>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "llmopt/error.hpp"
#include "llmopt/llm.hpp"
#include "json.hpp"

using namespace llmopt;

namespace {

ChatMessage sized(Role role, std::size_t tokens, char fill = 'x') {
  return ChatMessage::make(role, std::string(tokens * 4, fill));
}

BackendConfig fast_config() {
  BackendConfig cfg;
  cfg.backoff_base = std::chrono::milliseconds(1);
  cfg.max_retries = 2;
  cfg.timeout = std::chrono::milliseconds(2000);
  return cfg;
}

std::optional<ErrorCode> code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

class FlakyBackend final : public ChatBackend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}
  Completion complete(const ChatRequest& request) override {
    ++calls;
    if (failures_-- > 0) throw Error(ErrorCode::Transport, "down");
    return Completion{std::vector<std::string>(static_cast<std::size_t>(request.n), "ok"), "", ""};
  }
  BackendKind kind() const noexcept override { return BackendKind::Scripted; }
  int calls = 0;

 private:
  int failures_;
};

}  // namespace

TEST_CASE("token estimate") {
  CHECK(estimate_tokens("") == 1);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
  CHECK(ChatMessage::make(Role::User, std::string(40, 'a')).token_estimate == 10);
  CHECK_THROWS_AS((void)ChatMessage::make(Role::User, ""), Error);
}

TEST_CASE("truncation leaves an in-budget transcript alone") {
  ChatTranscript t(100);
  for (int i = 0; i < 5; ++i) t.append(sized(i % 2 ? Role::Assistant : Role::User, 10));
  t.set_pinned_prefix_len(2);
  const auto out = truncate(t);
  CHECK(out.messages().size() == 5);
  CHECK(out.evicted() == 0);
}

TEST_CASE("truncation evicts messages 3..12 of 20 with budget for 10") {
  ChatTranscript t(100);
  for (int i = 0; i < 20; ++i) t.append(sized(i % 2 ? Role::Assistant : Role::User, 10, static_cast<char>('a' + i)));
  t.set_pinned_prefix_len(2);
  const auto out = truncate(t);
  REQUIRE(out.messages().size() == 10);
  CHECK(out.evicted() == 10);
  CHECK(out.total_tokens() <= out.token_budget());
  CHECK(out.messages()[0].content[0] == 'a');
  CHECK(out.messages()[1].content[0] == 'b');
  for (std::size_t i = 2; i < 10; ++i) CHECK(out.messages()[i].content[0] == static_cast<char>('a' + 10 + i));
  CHECK(out.pinned_prefix_len() == 2);
}

TEST_CASE("truncation keeps the latest exchange and raises on an oversized prefix") {
  ChatTranscript t(25);
  t.append(sized(Role::User, 10));
  t.append(sized(Role::Assistant, 10));
  t.set_pinned_prefix_len(2);
  t.append(sized(Role::User, 10));
  CHECK(code_of([&] { (void)truncate(t); }) == ErrorCode::Config);

  ChatTranscript big(15);
  big.append(sized(Role::User, 10));
  big.append(sized(Role::Assistant, 10));
  big.pin_all();
  CHECK(code_of([&] { (void)truncate(big); }) == ErrorCode::Config);
}

TEST_CASE("pinned prefix survives any sequence of sends") {
  ScriptedBackend backend(std::vector<std::string>(30, std::string(40, 'r')));
  ChatTranscript t(60);
  t.append(ChatMessage::make(Role::System, "sys"));
  t.append(ChatMessage::make(Role::User, "define"));
  t.append(ChatMessage::make(Role::Assistant, "loss"));
  t.pin_all();
  for (int i = 0; i < 30; ++i) {
    auto r = send(t, std::string(40, 'q'), backend, fast_config());
    t = r.transcript;
    CHECK(t.messages()[0].content == "sys");
    CHECK(t.messages()[2].content == "loss");
    CHECK(t.total_tokens() <= 60);
    CHECK(t.messages().back().role == Role::Assistant);
  }
  CHECK(t.evicted() > 0);
}

TEST_CASE("scripted backend replays in order and then runs dry") {
  ScriptedBackend backend({"A", "B"});
  ChatTranscript t;
  auto r1 = send(t, "q1", backend, fast_config());
  CHECK(r1.reply == "A");
  auto r2 = send(r1.transcript, "q2", backend, fast_config());
  CHECK(r2.reply == "B");
  CHECK(r2.transcript.messages().size() == 4);
  CHECK(code_of([&] { (void)send(r2.transcript, "q3", backend, fast_config()); }) == ErrorCode::ScriptExhausted);
}

TEST_CASE("sample_n consumes n scripted replies in order") {
  ScriptedBackend backend({"1", "2", "3", "4", "5", "6"});
  auto r = sample_n(ChatTranscript{}, "q", backend, fast_config(), 5);
  CHECK(r.replies == std::vector<std::string>{"1", "2", "3", "4", "5"});
  CHECK(r.transcript.messages().size() == 1);
  CHECK(backend.remaining() == 1);
  const auto t = append_reply(r.transcript, r.replies[2]);
  CHECK(t.messages().back().content == "3");
}

TEST_CASE("transport failures are retried, then surfaced") {
  FlakyBackend ok_after_two(2);
  CHECK(send(ChatTranscript{}, "q", ok_after_two, fast_config()).reply == "ok");
  CHECK(ok_after_two.calls == 3);
  FlakyBackend never(10);
  CHECK(code_of([&] { (void)send(ChatTranscript{}, "q", never, fast_config()); }) == ErrorCode::Transport);
  CHECK(never.calls == 3);
}

TEST_CASE("script file selection by task, sample and trial") {
  const auto script = Script::parse(
      "\"any\"\n"
      "{\"reply\": \"gd0\", \"task\": \"gradient_descent\", \"trial\": 0}\n"
      "{\"reply\": \"s1\", \"sample_id\": \"s1\"}\n"
      "\n");
  CHECK(script.queue_for(TaskKind::GradientDescent, "s1", 0) == std::vector<std::string>{"any", "gd0", "s1"});
  CHECK(script.queue_for(TaskKind::GradientDescent, "s2", 1) == std::vector<std::string>{"any"});
  CHECK(script.queue_for(TaskKind::HillClimbing, "s1", 0) == std::vector<std::string>{"any", "s1"});
  CHECK(code_of([] { (void)Script::parse("{\"task\": \"gd\"}"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("perfect oracle answers a gradient step with the exact update") {
  const ProblemInstance inst{"p", {2, 6, 0}, Solution{2, 3, 4}, 0};
  TaskConfig cfg;
  PerfectOracleBackend oracle(inst, cfg);
  PromptContext ctx{TemplateId::GdStep, {{"point", "(2, 3, 4)"}, {"lr", "0.1"}}};
  const auto reply = oracle.answer(ctx);
  const Solution parsed = parse_point(reply, 3);
  const Solution expected = gd_step(inst, Solution{2, 3, 4}, 0.1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(parsed[i] == expected[i]);

  ChatRequest req;
  req.context = &ctx;
  req.n = 5;
  PerfectOracleBackend fresh(inst, cfg);
  const auto five = fresh.complete(req);
  REQUIRE(five.replies.size() == 5);
  for (const auto& r : five.replies) CHECK(r == five.replies[0]);
}

TEST_CASE("perfect oracle covers the other templates") {
  const ProblemInstance inst{"p", {2, 6, 0}, Solution{10, 10, 10}, 0};
  TaskConfig cfg;
  PerfectOracleBackend oracle(inst, cfg);
  CHECK(oracle.answer({TemplateId::DefineLoss, {{"data", "(2, 6, 0)"}}}).find("(^y1-2)^2") != std::string::npos);
  const auto neighbours = parse_point_list(oracle.answer({TemplateId::HcGenerate, {{"solution", "(10, 10, 10)"}}}), 3);
  CHECK(neighbours == hc_neighbors(Solution{10, 10, 10}));
  CHECK(parse_point(oracle.answer({TemplateId::HcSelect, {}}), 3) == Solution{10, 10, 9});
  const auto grid =
      parse_point_list(oracle.answer({TemplateId::GridCreate, {{"low_bound", "2"}, {"high_bound", "3"}}}), 3);
  CHECK(grid.size() == 8);
  CHECK(parse_point(oracle.answer({TemplateId::GridSelect, {}}), 3) == Solution{2, 3, 2});
  CHECK(parse_point(oracle.answer({TemplateId::BlackBoxGuess, {{"pass_result", "f(1,1,1) = 3"}}}), 3) ==
        Solution{2, 6, 0});
}

TEST_CASE("backend config validation") {
  BackendConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(parse_backend_kind("perfect_oracle") == BackendKind::PerfectOracle);
  CHECK(parse_backend_kind("http") == BackendKind::Http);
  CHECK_THROWS_AS((void)parse_backend_kind("carrier-pigeon"), Error);
}

TEST_CASE("HTTP backend against a local chat-completion server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::atomic<int> fail_first{0};
  std::string last_auth;
  std::mutex auth_mutex;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    {
      std::lock_guard lock(auth_mutex);
      last_auth = req.get_header_value("Authorization");
    }
    if (fail_first-- > 0) {
      res.status = 503;
      res.set_content("busy", "text/plain");
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json out;
    out["choices"] = nlohmann::json::array();
    const int n = std::min(body.at("n").get<int>(), 3);  // a server capped at 3 choices
    for (int i = 0; i < n; ++i) {
      out["choices"].push_back(
          {{"index", i}, {"message", {{"role", "assistant"}, {"content", body["messages"].back()["content"]}}}});
    }
    res.set_content(out.dump(), "application/json");
  });
  server.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"unexpected\": true}", "application/json");
  });
  server.Post("/forbidden", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("LLMOPT_TEST_KEY", "sk-test-secret", 1);
  BackendConfig cfg = fast_config();
  cfg.kind = BackendKind::Http;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.api_key_env = "LLMOPT_TEST_KEY";
  auto gate = std::make_shared<RequestGate>(2);

  HttpBackend backend(cfg, gate);
  auto r = sample_n(ChatTranscript{}, "echo me", backend, cfg, 5);
  CHECK(r.replies == std::vector<std::string>(5, "echo me"));
  CHECK(last_auth == "Bearer sk-test-secret");
  CHECK(r.completion.raw_request.find("sk-test-secret") == std::string::npos);
  CHECK(r.completion.raw_request.find("temperature") != std::string::npos);
  CHECK(r.completion.raw_response.find("choices") != std::string::npos);

  hits = 0;
  fail_first = 2;
  CHECK(send(ChatTranscript{}, "again", backend, cfg).reply == "again");
  CHECK(hits == 3);

  fail_first = 100;
  CHECK(code_of([&] { (void)send(ChatTranscript{}, "down", backend, cfg); }) == ErrorCode::Transport);
  fail_first = 0;

  BackendConfig bad = cfg;
  bad.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/bad";
  HttpBackend bad_backend(bad, gate);
  CHECK(code_of([&] { (void)send(ChatTranscript{}, "x", bad_backend, bad); }) == ErrorCode::Protocol);
  bad.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/forbidden";
  HttpBackend forbidden(bad, gate);
  CHECK(code_of([&] { (void)send(ChatTranscript{}, "x", forbidden, bad); }) == ErrorCode::Protocol);

  server.stop();
  worker.join();

  BackendConfig closed = cfg;
  closed.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  closed.max_retries = 0;
  HttpBackend unreachable(closed, gate);
  CHECK(code_of([&] { (void)send(ChatTranscript{}, "x", unreachable, closed); }) == ErrorCode::Transport);
}

TEST_CASE("HTTP response parsing") {
  CHECK(HttpBackend::parse_response(R"({"choices":[{"message":{"content":"hi"}}]})") ==
        std::vector<std::string>{"hi"});
  CHECK(code_of([] { (void)HttpBackend::parse_response("not json"); }) == ErrorCode::Protocol);
  CHECK(code_of([] { (void)HttpBackend::parse_response(R"({"choices":[]})"); }) == ErrorCode::Protocol);
  CHECK(code_of([] { (void)HttpBackend::parse_response(R"({"choices":[{"message":{}}]})"); }) ==
        ErrorCode::Protocol);
}
