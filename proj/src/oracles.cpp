#include "llmopt/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "llmopt/error.hpp"

namespace llmopt {

namespace {

void require_arity(const ProblemInstance& instance, const Solution& point) {
  if (point.dim() != instance.dim()) {
    throw Error(ErrorCode::ArityMismatch, "arity mismatch: point has " + std::to_string(point.dim()) +
                                              " entries, instance '" + instance.id + "' has d=" +
                                              std::to_string(instance.dim()));
  }
}

void require_iters(int iters) {
  if (iters < 1) {
    throw Error(ErrorCode::InvalidArgument, "iteration count must be >= 1");
  }
}

}  // namespace

std::string_view task_name(TaskKind task) noexcept {
  switch (task) {
    case TaskKind::GradientDescent:
      return "gradient_descent";
    case TaskKind::HillClimbing:
      return "hill_climbing";
    case TaskKind::GridSearch:
      return "grid_search";
    case TaskKind::BlackBox:
      return "black_box";
  }
  return "unknown";
}

TaskKind parse_task(std::string_view name) {
  if (name == "gradient_descent" || name == "gd") return TaskKind::GradientDescent;
  if (name == "hill_climbing" || name == "hc") return TaskKind::HillClimbing;
  if (name == "grid_search" || name == "grid") return TaskKind::GridSearch;
  if (name == "black_box" || name == "bb") return TaskKind::BlackBox;
  throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

void TaskConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::Config, "iterations must be >= 1");
  if (trials < 1) throw Error(ErrorCode::Config, "trials must be >= 1");
  if (self_consistency_n < 1) throw Error(ErrorCode::Config, "self_consistency_n must be >= 1");
  switch (task) {
    case TaskKind::GradientDescent:
      if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::Config, "lr must be a positive real");
      break;
    case TaskKind::GridSearch:
      if (grid_low > grid_high) throw Error(ErrorCode::Config, "grid_low must be <= grid_high");
      break;
    case TaskKind::BlackBox:
      if (bb_seed_count < 1) throw Error(ErrorCode::Config, "bb_seed_count must be >= 1");
      break;
    case TaskKind::HillClimbing:
      break;
  }
}

Solution gd_step(const ProblemInstance& instance, const Solution& point, double lr) {
  require_arity(instance, point);
  if (!(lr > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  }
  const double scale = 2.0 / static_cast<double>(instance.dim());
  std::vector<double> next(point.dim());
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = point[i] - lr * scale * (point[i] - instance.y[i]);
  }
  return Solution(std::move(next));
}

OracleTrace gd_run(const ProblemInstance& instance, double lr, int iters) {
  require_iters(iters);
  OracleTrace trace{TaskKind::GradientDescent, {}, false};
  Solution point = instance.init;
  trace.steps.push_back({point, mse_loss(instance, point)});
  for (int k = 0; k < iters; ++k) {
    point = gd_step(instance, point, lr);
    trace.steps.push_back({point, mse_loss(instance, point)});
  }
  return trace;
}

std::vector<Solution> hc_neighbors(const Solution& point) {
  if (point.dim() == 0) {
    throw Error(ErrorCode::InvalidArgument, "hc_neighbors: empty point");
  }
  std::vector<Solution> out;
  out.reserve(2 * point.dim());
  std::vector<double> values(point.values().begin(), point.values().end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (double delta : {1.0, -1.0}) {
      auto moved = values;
      moved[i] += delta;
      out.emplace_back(std::move(moved));
    }
  }
  return out;
}

HillStep hc_step(const ProblemInstance& instance, const Solution& point) {
  require_arity(instance, point);
  const double current = mse_loss(instance, point);
  double best_loss = std::numeric_limits<double>::infinity();
  const Solution* best = nullptr;
  const auto neighbors = hc_neighbors(point);
  for (const auto& n : neighbors) {
    const double loss = mse_loss(instance, n);
    if (loss < best_loss) {
      best_loss = loss;
      best = &n;
    }
  }
  if (best == nullptr || !(best_loss < current)) {
    return {point, false};
  }
  return {*best, true};
}

OracleTrace hc_run(const ProblemInstance& instance, int iters) {
  require_iters(iters);
  OracleTrace trace{TaskKind::HillClimbing, {}, false};
  Solution point = instance.init;
  trace.steps.push_back({point, mse_loss(instance, point)});
  for (int k = 0; k < iters; ++k) {
    auto step = hc_step(instance, point);
    if (!step.improved) {
      trace.converged = true;
      break;
    }
    point = std::move(step.point);
    trace.steps.push_back({point, mse_loss(instance, point)});
  }
  return trace;
}

Solution grid_optimum(const ProblemInstance& instance, int low, int high) {
  if (low > high) {
    throw Error(ErrorCode::InvalidArgument, "grid bounds: low > high");
  }
  std::vector<double> out(instance.dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = instance.y[i];
    const double lo = std::clamp(std::floor(y), static_cast<double>(low), static_cast<double>(high));
    const double hi = std::clamp(lo + 1.0, static_cast<double>(low), static_cast<double>(high));
    out[i] = (hi - y) * (hi - y) < (lo - y) * (lo - y) ? hi : lo;
  }
  return Solution(std::move(out));
}

std::optional<std::size_t> grid_size(int low, int high, std::size_t d, std::size_t cap) {
  if (low > high) {
    throw Error(ErrorCode::InvalidArgument, "grid bounds: low > high");
  }
  const auto side = static_cast<std::size_t>(static_cast<long long>(high) - low + 1);
  std::size_t count = 1;
  for (std::size_t i = 0; i < d; ++i) {
    if (count > cap / side) {
      return std::nullopt;
    }
    count *= side;
  }
  if (count > cap) {
    return std::nullopt;
  }
  return count;
}

std::vector<Solution> grid_enumerate(int low, int high, std::size_t d, std::size_t cap) {
  if (d == 0) {
    throw Error(ErrorCode::InvalidArgument, "grid_enumerate: d must be >= 1");
  }
  const auto count = grid_size(low, high, d, cap);
  if (!count) {
    const double side = static_cast<double>(high) - low + 1.0;
    throw Error(ErrorCode::GridTooLarge,
                "grid too large: " + std::to_string(static_cast<long long>(side)) + "^" + std::to_string(d) +
                    " = " + format_exact(std::pow(side, static_cast<double>(d))) + " points exceeds cap " +
                    std::to_string(cap));
  }
  std::vector<Solution> out;
  out.reserve(*count);
  std::vector<double> current(d, static_cast<double>(low));
  for (std::size_t n = 0; n < *count; ++n) {
    out.emplace_back(current);
    // Odometer increment, last coordinate fastest.
    for (std::size_t i = d; i-- > 0;) {
      if (current[i] < high) {
        current[i] += 1.0;
        break;
      }
      current[i] = low;
    }
  }
  return out;
}

double reference_loss(TaskKind task, const ProblemInstance& instance, const TaskConfig& cfg) {
  switch (task) {
    case TaskKind::GradientDescent:
      return gd_run(instance, cfg.lr, cfg.iterations).final_loss();
    case TaskKind::HillClimbing:
      return hc_run(instance, cfg.iterations).final_loss();
    case TaskKind::GridSearch:
      return mse_loss(instance, grid_optimum(instance, cfg.grid_low, cfg.grid_high));
    case TaskKind::BlackBox:
      break;
  }
  throw Error(ErrorCode::NoGroundTruth, "no ground truth for the black-box task");
}

OracleTrace reference_trace(const ProblemInstance& instance, const TaskConfig& cfg) {
  switch (cfg.task) {
    case TaskKind::GradientDescent:
      return gd_run(instance, cfg.lr, cfg.iterations);
    case TaskKind::HillClimbing:
      return hc_run(instance, cfg.iterations);
    case TaskKind::GridSearch: {
      OracleTrace trace{TaskKind::GridSearch, {}, true};
      trace.steps.push_back({instance.init, mse_loss(instance, instance.init)});
      auto best = grid_optimum(instance, cfg.grid_low, cfg.grid_high);
      const double loss = mse_loss(instance, best);
      trace.steps.push_back({std::move(best), loss});
      return trace;
    }
    case TaskKind::BlackBox:
      break;
  }
  throw Error(ErrorCode::NoGroundTruth, "no ground truth for the black-box task");
}

}  // namespace llmopt
