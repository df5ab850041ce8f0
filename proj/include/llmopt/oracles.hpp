#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "llmopt/core.hpp"

namespace llmopt {

enum class TaskKind { GradientDescent, HillClimbing, GridSearch, BlackBox };

[[nodiscard]] std::string_view task_name(TaskKind task) noexcept;
/// Accepts the canonical names ("gradient_descent", ...) and the short forms gd/hc/grid/bb.
[[nodiscard]] TaskKind parse_task(std::string_view name);

struct TraceStep {
  Solution solution;
  double loss = 0.0;
};

/// Step 0 is always the starting point; later entries are successive iterates.
struct OracleTrace {
  TaskKind task = TaskKind::GradientDescent;
  std::vector<TraceStep> steps;
  bool converged = false;

  [[nodiscard]] double final_loss() const { return steps.back().loss; }
};

/// Per-task parameters. Fields that do not apply to a task are ignored by it.
struct TaskConfig {
  TaskKind task = TaskKind::GradientDescent;
  int iterations = 10;
  int trials = 5;
  double lr = 0.1;
  int grid_low = 0;
  int grid_high = 10;
  int bb_seed_count = 2;
  int self_consistency_n = 1;

  void validate() const;
};

// Gradient of the 1/d-normalised MSE is (2/d)(yhat - y).
[[nodiscard]] Solution gd_step(const ProblemInstance& instance, const Solution& point, double lr);
[[nodiscard]] OracleTrace gd_run(const ProblemInstance& instance, double lr, int iters);

/// 2d neighbours: +1 then -1 on index 0, then index 1, and so on.
[[nodiscard]] std::vector<Solution> hc_neighbors(const Solution& point);

struct HillStep {
  Solution point;
  bool improved = false;
};
/// Best neighbour by loss (first wins ties); the input point when none is strictly better.
[[nodiscard]] HillStep hc_step(const ProblemInstance& instance, const Solution& point);
[[nodiscard]] OracleTrace hc_run(const ProblemInstance& instance, int iters);

/// Exact minimiser over {low..high}^d. MSE separates per coordinate, so this
/// never enumerates; ties go to the smaller integer.
[[nodiscard]] Solution grid_optimum(const ProblemInstance& instance, int low, int high);

/// Number of grid points, or nullopt when it exceeds `cap`.
[[nodiscard]] std::optional<std::size_t> grid_size(int low, int high, std::size_t d, std::size_t cap);

/// Lexicographic enumeration of {low..high}^d. Throws GridTooLarge above `cap` points.
[[nodiscard]] std::vector<Solution> grid_enumerate(int low, int high, std::size_t d, std::size_t cap);

/// loss_truth for the Policy metric; BlackBox has none and throws NoGroundTruth.
[[nodiscard]] double reference_loss(TaskKind task, const ProblemInstance& instance, const TaskConfig& cfg);

/// Full reference trace for a task, same budget as an LLM trial.
[[nodiscard]] OracleTrace reference_trace(const ProblemInstance& instance, const TaskConfig& cfg);

}  // namespace llmopt
