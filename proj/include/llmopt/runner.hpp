#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "llmopt/core.hpp"
#include "llmopt/llm.hpp"
#include "llmopt/metrics.hpp"
#include "llmopt/oracles.hpp"
#include "llmopt/prompts.hpp"

namespace llmopt {

enum class PointOrigin { Init, Seed, Model };

[[nodiscard]] std::string_view origin_name(PointOrigin origin) noexcept;

struct VisitedPoint {
  Solution solution;
  double loss = 0.0;  // always recomputed by the harness
  PointOrigin origin = PointOrigin::Model;
};

/// One prompt and what came back for it.
struct Exchange {
  TemplateId template_id = TemplateId::DefineLoss;
  std::string prompt;
  std::vector<std::string> replies;  // more than one under self-consistency
  std::size_t chosen = 0;
  std::string raw_request;
  std::string raw_response;
  std::size_t evicted_total = 0;  // transcript messages evicted so far
  std::optional<std::string> error;
};

/// Iteration 0 is the loss definition (plus black-box seeds); 1..N the search steps.
struct IterationRecord {
  int iteration = 0;
  std::vector<Exchange> exchanges;
  std::vector<VisitedPoint> points;
};

struct TrialTrace {
  std::string source = "llm";  // "llm" or "oracle"
  TaskConfig config;
  ProblemInstance instance;
  int trial_index = 0;
  std::string backend;
  std::vector<IterationRecord> iterations;
  std::optional<Solution> final_solution;
  TrialOutcome outcome;
  bool complete = false;  // false when the trace file ended before an outcome record

  [[nodiscard]] std::vector<VisitedPoint> visited() const;
};

/// Receives a trial as it progresses so aborted runs leave partial traces.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void begin(const TrialTrace& trace) = 0;
  virtual void iteration(const TrialTrace& trace, const IterationRecord& record) = 0;
  virtual void end(const TrialTrace& trace) = 0;
};

struct TrialOptions {
  const TemplateRegistry* templates = nullptr;  // defaults when null
  BackendConfig backend;
  std::size_t token_budget = kDefaultTokenBudget;
  std::string system_prompt;  // optional, pinned when present
  double self_consistency_tol = 1e-6;
  std::uint64_t seed = 0;  // experiment seed for black-box history
  TraceSink* sink = nullptr;
};

/// Black-box starting history: instance.init followed by bb_seed_count - 1
/// integer points drawn from a stream keyed by (seed, sample id). Shared by
/// every trial of a sample.
[[nodiscard]] std::vector<Solution> black_box_seeds(const ProblemInstance& instance, const TaskConfig& cfg,
                                                    std::uint64_t seed);

/// Runs one optimisation episode. Parse, transport and script failures end
/// the trial with outcome.failed set; they never propagate.
[[nodiscard]] TrialTrace run_trial(const TaskConfig& cfg, const ProblemInstance& instance, int trial_index,
                                   ChatBackend& backend, const TrialOptions& options);

/// Oracle run recorded in the trial trace schema (source "oracle").
[[nodiscard]] TrialTrace oracle_trial_trace(const TaskConfig& cfg, const ProblemInstance& instance);

class BackendFactory {
 public:
  virtual ~BackendFactory() = default;
  /// Must be safe to call from several worker threads at once.
  [[nodiscard]] virtual std::unique_ptr<ChatBackend> make(const TaskConfig& cfg, const ProblemInstance& instance,
                                                          int trial_index) = 0;
};

/// Factory for the configured kind. Scripted loads the script once; HTTP
/// shares one request gate across every trial.
[[nodiscard]] std::unique_ptr<BackendFactory> make_backend_factory(const BackendConfig& config);

struct ExperimentConfig {
  std::vector<TaskConfig> tasks;
  BackendConfig backend;
  ExclusionRule exclusion;
  std::uint64_t seed = 0;
  std::size_t token_budget = kDefaultTokenBudget;
  int parallelism = 1;
  std::optional<std::filesystem::path> templates_dir;
  std::string system_prompt;
  double self_consistency_tol = 1e-6;

  void validate() const;
};

/// Structured config file (JSON). Unknown tasks and an "api_key" field are rejected.
[[nodiscard]] ExperimentConfig parse_experiment_config(const nlohmann::json& j);
[[nodiscard]] ExperimentConfig load_experiment_config(const std::filesystem::path& path);
[[nodiscard]] nlohmann::json to_json(const ExperimentConfig& config);
[[nodiscard]] nlohmann::json to_json(const TaskConfig& config);
[[nodiscard]] TaskConfig task_config_from_json(const nlohmann::json& j);

struct TaskOutcome {
  TaskKind task = TaskKind::GradientDescent;
  TrialOutcome outcome;
};

struct ExperimentReport {
  MetricReport metrics;
  std::vector<SampleMetrics> samples;
  std::vector<TaskOutcome> outcomes;  // after exclusion, sorted by (task, sample, trial)
  std::vector<std::string> warnings;
  nlohmann::json manifest;
};

/// Exclusion, per-sample G/P/U and aggregation over finished traces.
/// Independent of trace order.
[[nodiscard]] ExperimentReport evaluate(std::span<const TrialTrace> traces, const ExclusionRule& rule);

/// Runs every (task, instance, trial) on a bounded worker pool. With
/// `out_dir` set, traces go to out_dir/traces/ before metrics are computed.
[[nodiscard]] ExperimentReport run_experiment(const Dataset& dataset, const ExperimentConfig& config,
                                              BackendFactory& factory,
                                              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

enum ReportFormat : unsigned { kReportCsv = 1u, kReportJson = 2u };

/// Writes metrics.csv / metrics.json into `dir`; returns the written paths.
std::vector<std::filesystem::path> emit_report(const MetricReport& report, unsigned formats,
                                               const std::filesystem::path& dir);

// ------------------------------------------------------------------ traces

/// Trace files are JSON lines: one "header", then "iteration" records, then an "outcome".
[[nodiscard]] nlohmann::json trace_header_json(const TrialTrace& trace);
[[nodiscard]] nlohmann::json iteration_json(const IterationRecord& record);
[[nodiscard]] nlohmann::json outcome_json(const TrialTrace& trace);
[[nodiscard]] std::string trace_to_jsonl(const TrialTrace& trace);
[[nodiscard]] TrialTrace trace_from_jsonl(std::string_view text);

/// `<dir>/<task>/<sample_id>.t<k>.jsonl`, flushed after every record.
class JsonlTraceWriter final : public TraceSink {
 public:
  explicit JsonlTraceWriter(std::filesystem::path dir);

  void begin(const TrialTrace& trace) override;
  void iteration(const TrialTrace& trace, const IterationRecord& record) override;
  void end(const TrialTrace& trace) override;

  [[nodiscard]] static std::filesystem::path path_for(const std::filesystem::path& dir, const TrialTrace& trace);

 private:
  void write_line(const TrialTrace& trace, const nlohmann::json& j, bool truncate);

  std::filesystem::path dir_;
};

void save_trace(const std::filesystem::path& dir, const TrialTrace& trace);
/// Every *.jsonl under `dir`, recursively, in path order.
[[nodiscard]] std::vector<TrialTrace> load_traces(const std::filesystem::path& dir);

}  // namespace llmopt
