#include "llmopt/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>
#include <type_traits>

#include "llmopt/error.hpp"
#include "llmopt/serialization.hpp"

namespace llmopt {

std::string_view origin_name(PointOrigin origin) noexcept {
  switch (origin) {
    case PointOrigin::Init:
      return "init";
    case PointOrigin::Seed:
      return "seed";
    case PointOrigin::Model:
      return "model";
  }
  return "model";
}

std::vector<VisitedPoint> TrialTrace::visited() const {
  std::vector<VisitedPoint> out;
  for (const auto& rec : iterations) {
    out.insert(out.end(), rec.points.begin(), rec.points.end());
  }
  return out;
}

std::vector<Solution> black_box_seeds(const ProblemInstance& instance, const TaskConfig& cfg, std::uint64_t seed) {
  std::vector<Solution> seeds{instance.init};
  Rng rng(derive_seed(seed, instance.id, 0));
  for (int k = 1; k < cfg.bb_seed_count; ++k) {
    seeds.push_back(random_integer_point(rng, instance.dim(), static_cast<int>(kValueLow),
                                         static_cast<int>(kValueHigh)));
  }
  return seeds;
}

namespace {

std::string error_label(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse:
      return "parse";
    case ErrorCode::Transport:
      return "transport";
    case ErrorCode::Protocol:
      return "protocol";
    case ErrorCode::ScriptExhausted:
      return "script exhausted";
    case ErrorCode::Config:
      return "config";
    default:
      return "error";
  }
}

// Fills outcome fields from the visited points. Black-box keeps the best
// point seen; every other task reports its last iterate.
void finalize_outcome(TrialTrace& trace) {
  const auto points = trace.visited();
  auto& o = trace.outcome;
  o.sample_id = trace.instance.id;
  o.trial_index = trace.trial_index;
  o.init_loss = mse_loss(trace.instance, trace.instance.init);
  if (points.empty()) {
    o.final_loss = o.init_loss;
    trace.final_solution = trace.instance.init;
    return;
  }
  if (trace.config.task == TaskKind::BlackBox) {
    double best_seed = std::numeric_limits<double>::infinity();
    for (const auto& p : points) {
      if (p.origin == PointOrigin::Seed) best_seed = std::min(best_seed, p.loss);
    }
    if (std::isfinite(best_seed)) o.init_loss = best_seed;
    const auto best = std::min_element(points.begin(), points.end(),
                                       [](const VisitedPoint& a, const VisitedPoint& b) { return a.loss < b.loss; });
    o.final_loss = best->loss;
    trace.final_solution = best->solution;
  } else {
    o.final_loss = points.back().loss;
    trace.final_solution = points.back().solution;
  }
}

class TrialRun {
 public:
  TrialRun(const TaskConfig& cfg, const ProblemInstance& instance, int trial_index, ChatBackend& backend,
           const TrialOptions& options)
      : cfg_(cfg),
        instance_(instance),
        backend_(backend),
        options_(options),
        templates_(options.templates != nullptr ? *options.templates : default_templates_),
        transcript_(options.token_budget) {
    trace_.config = cfg;
    trace_.instance = instance;
    trace_.trial_index = trial_index;
    trace_.backend = std::string(backend_kind_name(backend.kind()));
  }

  TrialTrace run() {
    if (options_.sink) options_.sink->begin(trace_);
    IterationRecord current;
    try {
      protocol(current);
    } catch (const Error& e) {
      trace_.outcome.failed = true;
      trace_.outcome.reason = error_label(e.code()) + ": " + e.what();
      if (!current.exchanges.empty() || !current.points.empty()) {
        commit(std::move(current));
      }
    }
    finalize_outcome(trace_);
    trace_.complete = true;
    if (options_.sink) options_.sink->end(trace_);
    return std::move(trace_);
  }

 private:
  void protocol(IterationRecord& current) {
    const auto d = instance_.dim();
    if (!options_.system_prompt.empty()) {
      transcript_.append(ChatMessage::make(Role::System, options_.system_prompt));
    }
    current.iteration = 0;
    ask_text(TemplateId::DefineLoss, {{"data", format_tuple(instance_.y)}}, current);
    transcript_.pin_all();

    switch (cfg_.task) {
      case TaskKind::GradientDescent: {
        add_point(current, instance_.init, PointOrigin::Init);
        commit(std::exchange(current, {}));
        Solution point = instance_.init;
        for (int it = 1; it <= cfg_.iterations; ++it) {
          current.iteration = it;
          point = ask_point(TemplateId::GdStep, {{"lr", format_real(cfg_.lr)}, {"point", format_tuple(point)}},
                            current, d);
          add_point(current, point, PointOrigin::Model);
          commit(std::exchange(current, {}));
        }
        break;
      }
      case TaskKind::HillClimbing: {
        add_point(current, instance_.init, PointOrigin::Init);
        commit(std::exchange(current, {}));
        Solution point = instance_.init;
        for (int it = 1; it <= cfg_.iterations; ++it) {
          current.iteration = it;
          ask_list(TemplateId::HcGenerate, {{"solution", format_tuple(point)}}, current, d);
          point = ask_point(TemplateId::HcSelect, {}, current, d);
          add_point(current, point, PointOrigin::Model);
          commit(std::exchange(current, {}));
        }
        break;
      }
      case TaskKind::GridSearch: {
        add_point(current, instance_.init, PointOrigin::Init);
        commit(std::exchange(current, {}));
        current.iteration = 1;
        ask_text(TemplateId::GridCreate,
                 {{"low_bound", std::to_string(cfg_.grid_low)}, {"high_bound", std::to_string(cfg_.grid_high)}},
                 current);
        const auto best = ask_point(TemplateId::GridSelect, {}, current, d);
        add_point(current, best, PointOrigin::Model);
        commit(std::exchange(current, {}));
        break;
      }
      case TaskKind::BlackBox: {
        std::vector<HistoryEntry> history;
        for (auto& s : black_box_seeds(instance_, cfg_, options_.seed)) {
          add_point(current, s, PointOrigin::Seed);
          history.push_back({std::move(s), current.points.back().loss});
        }
        commit(std::exchange(current, {}));
        for (int it = 1; it <= cfg_.iterations; ++it) {
          current.iteration = it;
          auto guess = ask_point(TemplateId::BlackBoxGuess, {{"pass_result", format_history(history)}}, current, d);
          add_point(current, guess, PointOrigin::Model);
          history.push_back({std::move(guess), current.points.back().loss});
          commit(std::exchange(current, {}));
        }
        break;
      }
    }
  }

  void add_point(IterationRecord& rec, const Solution& s, PointOrigin origin) {
    rec.points.push_back({s, mse_loss(instance_, s), origin});
  }

  void commit(IterationRecord rec) {
    trace_.iterations.push_back(std::move(rec));
    if (options_.sink) options_.sink->iteration(trace_, trace_.iterations.back());
  }

  double loss_of(const Solution& s) const { return mse_loss(instance_, s); }

  // One prompt, optionally n samples, with a single re-ask carrying the
  // format reminder when nothing parses.
  template <class T, class Parse>
  T ask(TemplateId id, const Bindings& bindings, IterationRecord& rec, int n, Parse parse) {
    const PromptContext context{id, bindings};
    const std::string prompt = templates_.render(id, bindings);
    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
      Exchange ex;
      ex.template_id = id;
      ex.prompt = attempt == 0 ? prompt : prompt + "\n" + templates_.reminder(id);
      SampleResult sampled;
      try {
        sampled = sample_n(transcript_, ex.prompt, backend_, options_.backend, n, &context);
      } catch (const Error& e) {
        ex.error = e.what();
        rec.exchanges.push_back(std::move(ex));
        throw;
      }
      ex.replies = sampled.replies;
      ex.raw_request = std::move(sampled.completion.raw_request);
      ex.raw_response = std::move(sampled.completion.raw_response);

      std::vector<T> parsed;
      std::vector<std::size_t> source;
      for (std::size_t i = 0; i < ex.replies.size(); ++i) {
        try {
          parsed.push_back(parse(ex.replies[i]));
          source.push_back(i);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::Parse && e.code() != ErrorCode::InvalidArgument) throw;
          last_error = e.what();
        }
      }
      std::size_t pick = 0;
      if constexpr (std::is_same_v<T, Solution>) {
        if (parsed.size() > 1) {
          pick = self_consistent_index(parsed, [this](const Solution& s) { return loss_of(s); },
                                       options_.self_consistency_tol);
        }
      }
      ex.chosen = parsed.empty() ? 0 : source[pick];
      transcript_ = append_reply(std::move(sampled.transcript), ex.replies[ex.chosen]);
      ex.evicted_total = transcript_.evicted();
      if (parsed.empty()) {
        ex.error = last_error;
        rec.exchanges.push_back(std::move(ex));
        continue;
      }
      rec.exchanges.push_back(std::move(ex));
      return std::move(parsed[pick]);
    }
    throw Error(ErrorCode::Parse, std::string(template_name(id)) + " reply unparseable after re-ask: " + last_error);
  }

  void ask_text(TemplateId id, const Bindings& bindings, IterationRecord& rec) {
    ask<std::string>(id, bindings, rec, 1, [](const std::string& reply) { return reply; });
  }

  Solution ask_point(TemplateId id, const Bindings& bindings, IterationRecord& rec, std::size_t d) {
    return ask<Solution>(id, bindings, rec, cfg_.self_consistency_n,
                         [d](const std::string& reply) { return parse_point(reply, d); });
  }

  std::vector<Solution> ask_list(TemplateId id, const Bindings& bindings, IterationRecord& rec, std::size_t d) {
    return ask<std::vector<Solution>>(id, bindings, rec, 1, [d](const std::string& reply) {
      auto list = parse_point_list(reply, d);
      if (list.empty()) throw Error(ErrorCode::Parse, "empty neighbor list");
      return list;
    });
  }

  inline static const TemplateRegistry default_templates_{};

  const TaskConfig& cfg_;
  const ProblemInstance& instance_;
  ChatBackend& backend_;
  const TrialOptions& options_;
  const TemplateRegistry& templates_;
  ChatTranscript transcript_;
  TrialTrace trace_;
};

}  // namespace

TrialTrace run_trial(const TaskConfig& cfg, const ProblemInstance& instance, int trial_index, ChatBackend& backend,
                     const TrialOptions& options) {
  cfg.validate();
  validate(instance);
  return TrialRun(cfg, instance, trial_index, backend, options).run();
}

TrialTrace oracle_trial_trace(const TaskConfig& cfg, const ProblemInstance& instance) {
  cfg.validate();
  validate(instance);
  const auto reference = reference_trace(instance, cfg);
  TrialTrace trace;
  trace.source = "oracle";
  trace.config = cfg;
  trace.instance = instance;
  trace.backend = "oracle";
  for (std::size_t k = 0; k < reference.steps.size(); ++k) {
    IterationRecord rec;
    rec.iteration = static_cast<int>(k);
    rec.points.push_back(
        {reference.steps[k].solution, reference.steps[k].loss, k == 0 ? PointOrigin::Init : PointOrigin::Model});
    trace.iterations.push_back(std::move(rec));
  }
  finalize_outcome(trace);
  trace.complete = true;
  return trace;
}

// ---------------------------------------------------------------- factories

namespace {

class ScriptedFactory final : public BackendFactory {
 public:
  explicit ScriptedFactory(Script script) : script_(std::move(script)) {}
  std::unique_ptr<ChatBackend> make(const TaskConfig& cfg, const ProblemInstance& instance, int trial) override {
    return std::make_unique<ScriptedBackend>(script_.queue_for(cfg.task, instance.id, trial));
  }

 private:
  const Script script_;
};

class OracleFactory final : public BackendFactory {
 public:
  std::unique_ptr<ChatBackend> make(const TaskConfig& cfg, const ProblemInstance& instance, int) override {
    return std::make_unique<PerfectOracleBackend>(instance, cfg);
  }
};

class HttpFactory final : public BackendFactory {
 public:
  explicit HttpFactory(BackendConfig config)
      : config_(std::move(config)), gate_(std::make_shared<RequestGate>(config_.max_concurrent_requests)) {}
  std::unique_ptr<ChatBackend> make(const TaskConfig&, const ProblemInstance&, int) override {
    return std::make_unique<HttpBackend>(config_, gate_);
  }

 private:
  const BackendConfig config_;
  std::shared_ptr<RequestGate> gate_;
};

}  // namespace

std::unique_ptr<BackendFactory> make_backend_factory(const BackendConfig& config) {
  config.validate();
  switch (config.kind) {
    case BackendKind::Scripted:
      return std::make_unique<ScriptedFactory>(Script::load(config.script_path));
    case BackendKind::PerfectOracle:
      return std::make_unique<OracleFactory>();
    case BackendKind::Http:
      return std::make_unique<HttpFactory>(config);
  }
  throw Error(ErrorCode::Config, "unknown backend kind");
}

// ------------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  for (const auto& t : tasks) t.validate();
  backend.validate();
  if (parallelism < 1) throw Error(ErrorCode::Config, "parallelism must be >= 1");
  if (token_budget == 0) throw Error(ErrorCode::Config, "token_budget must be positive");
  if (!(exclusion.divergence_factor > 0.0)) throw Error(ErrorCode::Config, "divergence_factor must be positive");
}

nlohmann::json to_json(const TaskConfig& c) {
  return {{"task", task_name(c.task)},
          {"iterations", c.iterations},
          {"trials", c.trials},
          {"lr", c.lr},
          {"grid_low", c.grid_low},
          {"grid_high", c.grid_high},
          {"bb_seed_count", c.bb_seed_count},
          {"self_consistency_n", c.self_consistency_n}};
}

TaskConfig task_config_from_json(const nlohmann::json& j) {
  TaskConfig c;
  c.task = parse_task(j.at("task").get<std::string>());
  c.iterations = j.value("iterations", c.iterations);
  c.trials = j.value("trials", c.trials);
  c.lr = j.value("lr", c.lr);
  c.grid_low = j.value("grid_low", c.grid_low);
  c.grid_high = j.value("grid_high", c.grid_high);
  c.bb_seed_count = j.value("bb_seed_count", c.bb_seed_count);
  c.self_consistency_n = j.value("self_consistency_n", c.self_consistency_n);
  return c;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  ExperimentConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.token_budget = j.value("token_budget", c.token_budget);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.system_prompt = j.value("system_prompt", c.system_prompt);
    c.self_consistency_tol = j.value("self_consistency_tol", c.self_consistency_tol);
    if (j.contains("templates_dir") && !j["templates_dir"].is_null()) {
      c.templates_dir = j["templates_dir"].get<std::string>();
    }
    if (j.contains("exclusion")) {
      const auto& e = j["exclusion"];
      c.exclusion.divergence_factor = e.value("divergence_factor", c.exclusion.divergence_factor);
      c.exclusion.exclude_failed = e.value("exclude_failed", c.exclusion.exclude_failed);
    }
    if (j.contains("backend")) {
      const auto& b = j["backend"];
      if (b.contains("api_key")) {
        throw Error(ErrorCode::Config, "API keys are read from the environment only; remove backend.api_key");
      }
      auto& bc = c.backend;
      if (b.contains("kind")) bc.kind = parse_backend_kind(b["kind"].get<std::string>());
      bc.model_name = b.value("model", bc.model_name);
      bc.temperature = b.value("temperature", bc.temperature);
      bc.samples_per_call = b.value("samples_per_call", bc.samples_per_call);
      bc.timeout = std::chrono::milliseconds(b.value("timeout_ms", static_cast<long long>(bc.timeout.count())));
      bc.max_retries = b.value("max_retries", bc.max_retries);
      bc.backoff_base =
          std::chrono::milliseconds(b.value("backoff_ms", static_cast<long long>(bc.backoff_base.count())));
      bc.endpoint = b.value("endpoint", bc.endpoint);
      bc.api_key_env = b.value("api_key_env", bc.api_key_env);
      bc.max_concurrent_requests = b.value("max_concurrent_requests", bc.max_concurrent_requests);
      if (b.contains("script")) bc.script_path = b["script"].get<std::string>();
    }
    if (j.contains("tasks")) {
      for (const auto& t : j["tasks"]) c.tasks.push_back(task_config_from_json(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, "config '" + path.string() + "': " + e.what());
  }
  return parse_experiment_config(j);
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : c.tasks) tasks.push_back(to_json(t));
  const auto& b = c.backend;
  return {{"seed", c.seed},
          {"token_budget", c.token_budget},
          {"parallelism", c.parallelism},
          {"system_prompt", c.system_prompt},
          {"self_consistency_tol", c.self_consistency_tol},
          {"templates_dir", c.templates_dir ? nlohmann::json(c.templates_dir->string()) : nlohmann::json(nullptr)},
          {"exclusion",
           {{"divergence_factor", c.exclusion.divergence_factor}, {"exclude_failed", c.exclusion.exclude_failed}}},
          {"backend",
           {{"kind", backend_kind_name(b.kind)},
            {"model", b.model_name},
            {"temperature", b.temperature},
            {"samples_per_call", b.samples_per_call},
            {"timeout_ms", b.timeout.count()},
            {"max_retries", b.max_retries},
            {"backoff_ms", b.backoff_base.count()},
            {"endpoint", b.endpoint},
            {"api_key_env", b.api_key_env},
            {"max_concurrent_requests", b.max_concurrent_requests},
            {"script", b.script_path.string()}}},
          {"tasks", tasks}};
}

// --------------------------------------------------------------- evaluation

ExperimentReport evaluate(std::span<const TrialTrace> traces, const ExclusionRule& rule) {
  using Key = std::tuple<int, std::string>;
  std::map<Key, std::vector<const TrialTrace*>> groups;
  for (const auto& t : traces) {
    groups[{static_cast<int>(t.config.task), t.instance.id}].push_back(&t);
  }
  ExperimentReport report;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const TrialTrace* a, const TrialTrace* b) { return a->trial_index < b->trial_index; });
    const auto& first = *members.front();
    std::vector<TrialOutcome> outcomes;
    for (const auto* t : members) {
      auto o = t->outcome;
      if (!t->complete) {
        o.failed = true;
        o.reason = "incomplete trace";
      }
      outcomes.push_back(std::move(o));
    }
    outcomes = exclude_outliers(std::move(outcomes), rule, &report.warnings);
    std::optional<double> truth;
    if (first.config.task != TaskKind::BlackBox) {
      truth = reference_loss(first.config.task, first.instance, first.config);
    }
    report.samples.push_back(compute_sample_metrics(first.config.task, first.instance.dim(), outcomes, truth));
    for (auto& o : outcomes) report.outcomes.push_back({first.config.task, std::move(o)});
  }
  report.metrics = aggregate(report.samples);
  return report;
}

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace

ExperimentReport run_experiment(const Dataset& dataset, const ExperimentConfig& config, BackendFactory& factory,
                                const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  if (dataset.instances.empty()) {
    throw Error(ErrorCode::InvalidArgument, "dataset is empty");
  }
  const auto started = utc_now();
  const TemplateRegistry templates =
      config.templates_dir ? TemplateRegistry::load(*config.templates_dir) : TemplateRegistry{};

  struct Job {
    const TaskConfig* cfg;
    const ProblemInstance* instance;
    int trial;
  };
  std::vector<Job> jobs;
  for (const auto& cfg : config.tasks) {
    for (const auto& instance : dataset.instances) {
      for (int t = 0; t < cfg.trials; ++t) jobs.push_back({&cfg, &instance, t});
    }
  }

  std::optional<JsonlTraceWriter> writer;
  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir / "traces", ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create '" + (*out_dir / "traces").string() + "': " + ec.message());
    writer.emplace(*out_dir / "traces");
  }

  std::vector<TrialTrace> traces(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  const auto worker = [&] {
    while (!stop.load()) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const auto& job = jobs[i];
        auto backend = factory.make(*job.cfg, *job.instance, job.trial);
        TrialOptions options;
        options.templates = &templates;
        options.backend = config.backend;
        options.token_budget = config.token_budget;
        options.system_prompt = config.system_prompt;
        options.self_consistency_tol = config.self_consistency_tol;
        options.seed = config.seed;
        options.sink = writer ? &*writer : nullptr;
        traces[i] = run_trial(*job.cfg, *job.instance, job.trial, *backend, options);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop = true;
      }
    }
  };
  {
    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), jobs.size());
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  auto report = evaluate(traces, config.exclusion);

  nlohmann::json exclusions = nlohmann::json::array();
  for (const auto& [task, o] : report.outcomes) {
    if (!o.reason.empty()) {
      exclusions.push_back({{"task", task_name(task)},
                            {"sample_id", o.sample_id},
                            {"trial", o.trial_index},
                            {"excluded", o.excluded},
                            {"reason", o.reason}});
    }
  }
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& inst : dataset.instances) ids.push_back(inst.id);
  report.manifest = {{"dataset", {{"seed", dataset.seed}, {"instances", ids}}},
                     {"config", to_json(config)},
                     {"backend", backend_kind_name(config.backend.kind)},
                     {"trials_run", jobs.size()},
                     {"started_at", started},
                     {"finished_at", utc_now()},
                     {"exclusions", exclusions},
                     {"warnings", report.warnings}};
  if (out_dir) {
    write_file(*out_dir / "manifest.json", report.manifest.dump(2) + "\n");
  }
  return report;
}

std::vector<std::filesystem::path> emit_report(const MetricReport& report, unsigned formats,
                                               const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  if (formats & kReportCsv) {
    written.push_back(dir / "metrics.csv");
    write_file(written.back(), report_to_csv(report));
  }
  if (formats & kReportJson) {
    written.push_back(dir / "metrics.json");
    write_file(written.back(), report_to_json(report).dump(2) + "\n");
  }
  return written;
}

}  // namespace llmopt
