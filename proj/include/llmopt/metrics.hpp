#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "llmopt/oracles.hpp"

namespace llmopt {

struct TrialOutcome {
  std::string sample_id;
  int trial_index = 0;
  double init_loss = 0.0;   // loss_LLM,init
  double final_loss = 0.0;  // loss_LLM,i
  bool failed = false;      // unrecoverable parse or transport failure
  bool excluded = false;
  std::string reason;
};

/// Default rule: drop failed trials and trials whose final loss exceeds
/// k * init loss. `extra` may flag further trials; it returns a reason or nullopt.
struct ExclusionRule {
  double divergence_factor = 10.0;
  bool exclude_failed = true;
  std::function<std::optional<std::string>(const TrialOutcome&)> extra;
};

inline constexpr double kDegenerateTruthEpsilon = 1e-9;

/// Mean of (init - final) / init over non-excluded trials.
[[nodiscard]] double goal_metric(std::span<const TrialOutcome> outcomes);
/// Mean of (final - truth) / truth; nullopt when truth < epsilon.
[[nodiscard]] std::optional<double> policy_metric(std::span<const TrialOutcome> outcomes, double truth,
                                                  double epsilon = kDegenerateTruthEpsilon);
/// Population variance (divide by N) of the final losses.
[[nodiscard]] double uncertainty_metric(std::span<const TrialOutcome> outcomes);

/// Marks outcomes excluded per `rule`, keeping at least one trial per sample.
/// When every trial would go, the worst offender (largest final loss) stays
/// and a warning is appended.
[[nodiscard]] std::vector<TrialOutcome> exclude_outliers(std::vector<TrialOutcome> outcomes, const ExclusionRule& rule,
                                                         std::vector<std::string>* warnings = nullptr);

struct SampleMetrics {
  TaskKind task = TaskKind::GradientDescent;
  std::size_t dimension = 0;
  std::string sample_id;
  std::optional<double> goal;
  std::optional<double> policy;
  double uncertainty = 0.0;
  int n_used = 0;
  int n_excluded = 0;
  std::vector<std::string> notes;  // why G or P is absent
};

/// Runs G/P/U for one sample whose outcomes already went through exclusion.
/// `truth` is nullopt for tasks without ground truth.
[[nodiscard]] SampleMetrics compute_sample_metrics(TaskKind task, std::size_t dimension,
                                                   std::span<const TrialOutcome> outcomes,
                                                   std::optional<double> truth);

struct MetricStats {
  std::optional<double> mean;
  std::optional<double> std;  // population
  std::size_t n_samples = 0;  // samples contributing a value
  std::size_t n_skipped = 0;  // samples with the value absent
};

struct GroupReport {
  TaskKind task = TaskKind::GradientDescent;
  std::size_t dimension = 0;
  MetricStats goal;
  MetricStats policy;
  MetricStats uncertainty;
  std::size_t n_samples = 0;
  std::size_t n_excluded = 0;
};

struct MetricReport {
  std::vector<GroupReport> groups;  // sorted by (task, dimension)
};

[[nodiscard]] MetricReport aggregate(std::span<const SampleMetrics> samples);

// CSV columns: task, dimension, metric, mean, std, n_samples, n_excluded.
// Absent values are empty cells (CSV) or null (JSON), never zero.
[[nodiscard]] std::string report_to_csv(const MetricReport& report);
[[nodiscard]] nlohmann::json report_to_json(const MetricReport& report);

}  // namespace llmopt
