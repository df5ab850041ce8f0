#include "llmopt/llmopt.h"

#include <cstdlib>
#include <cstring>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "llmopt/core.hpp"
#include "llmopt/error.hpp"
#include "llmopt/metrics.hpp"
#include "llmopt/oracles.hpp"
#include "llmopt/runner.hpp"

struct llmopt_dataset {
  llmopt::Dataset value;
};

struct llmopt_config {
  llmopt::ExperimentConfig value;
  std::vector<llmopt::TaskConfig> from_file;  // per-task parameters kept for set_tasks
};

struct llmopt_report {
  llmopt::ExperimentReport value;
};

namespace {

thread_local std::string g_last_error;

llmopt_status fail(llmopt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

llmopt_status to_status(llmopt::ErrorCode code) { return static_cast<llmopt_status>(static_cast<int>(code)); }

// Runs `body`, translating exceptions into status codes.
template <class F>
llmopt_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return LLMOPT_OK;
  } catch (const llmopt::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(LLMOPT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LLMOPT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(LLMOPT_ERR_INTERNAL, "unknown exception");
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw llmopt::Error(llmopt::ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

llmopt::ProblemInstance raw_instance(const double* y, const double* init, std::size_t d) {
  require(y != nullptr && d > 0, "y must be a non-empty array");
  llmopt::ProblemInstance instance;
  instance.id = "capi";
  instance.y.assign(y, y + d);
  instance.init = init ? llmopt::Solution(std::vector<double>(init, init + d))
                       : llmopt::Solution(std::vector<double>(d, 0.0));
  return instance;
}

void copy_out(const llmopt::Solution& s, double* out) {
  for (std::size_t i = 0; i < s.dim(); ++i) out[i] = s[i];
}

std::vector<llmopt::TrialOutcome> raw_outcomes(const double* init, const double* finals, std::size_t n) {
  require(finals != nullptr && n > 0, "final losses must be a non-empty array");
  std::vector<llmopt::TrialOutcome> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].sample_id = "capi";
    out[i].trial_index = static_cast<int>(i);
    out[i].init_loss = init ? init[i] : 0.0;
    out[i].final_loss = finals[i];
  }
  return out;
}

}  // namespace

extern "C" {

const char* llmopt_version(void) { return "1.0.0"; }

const char* llmopt_status_name(llmopt_status status) {
  switch (status) {
    case LLMOPT_OK:
      return "ok";
    case LLMOPT_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case LLMOPT_ERR_ARITY:
      return "arity mismatch";
    case LLMOPT_ERR_GRID_TOO_LARGE:
      return "grid too large";
    case LLMOPT_ERR_NO_GROUND_TRUTH:
      return "no ground truth";
    case LLMOPT_ERR_UNDEFINED_METRIC:
      return "undefined metric";
    case LLMOPT_ERR_PARSE:
      return "parse error";
    case LLMOPT_ERR_SCRIPT_EXHAUSTED:
      return "script exhausted";
    case LLMOPT_ERR_TRANSPORT:
      return "transport error";
    case LLMOPT_ERR_PROTOCOL:
      return "protocol error";
    case LLMOPT_ERR_CONFIG:
      return "configuration error";
    case LLMOPT_ERR_IO:
      return "i/o error";
    case LLMOPT_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* llmopt_last_error(void) { return g_last_error.c_str(); }

void llmopt_string_free(char* s) { std::free(s); }

llmopt_status llmopt_dataset_generate(const size_t* dims, size_t n_dims, size_t per_dim, uint64_t seed,
                                      llmopt_dataset** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    require(dims != nullptr && n_dims > 0, "dims must be non-empty");
    *out = new llmopt_dataset{llmopt::gen_dataset(std::span<const std::size_t>(dims, n_dims), per_dim, seed)};
  });
}

llmopt_status llmopt_dataset_load(const char* path, llmopt_dataset** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    *out = new llmopt_dataset{llmopt::load_dataset(path)};
  });
}

llmopt_status llmopt_dataset_save(const llmopt_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset != nullptr && path != nullptr, "dataset and path are required");
    llmopt::save_dataset(path, dataset->value);
  });
}

llmopt_status llmopt_dataset_to_jsonl(const llmopt_dataset* dataset, char** out) {
  return guarded([&] {
    require(dataset != nullptr && out != nullptr, "dataset and out are required");
    *out = dup_string(llmopt::dataset_to_jsonl(dataset->value));
  });
}

size_t llmopt_dataset_size(const llmopt_dataset* dataset) { return dataset ? dataset->value.instances.size() : 0; }

size_t llmopt_dataset_dim(const llmopt_dataset* dataset, size_t index) {
  if (dataset == nullptr || index >= dataset->value.instances.size()) return 0;
  return dataset->value.instances[index].dim();
}

void llmopt_dataset_free(llmopt_dataset* dataset) { delete dataset; }

llmopt_status llmopt_mse_loss(const double* y, const double* yhat, size_t d, double* out) {
  return guarded([&] {
    require(y && yhat && out && d > 0, "y, yhat and out are required, d >= 1");
    *out = llmopt::mse_loss(std::span<const double>(y, d), std::span<const double>(yhat, d));
  });
}

llmopt_status llmopt_gd_step(const double* y, const double* point, size_t d, double lr, double* out_point) {
  return guarded([&] {
    require(point && out_point, "point and out_point are required");
    const auto instance = raw_instance(y, nullptr, d);
    copy_out(llmopt::gd_step(instance, llmopt::Solution(std::vector<double>(point, point + d)), lr), out_point);
  });
}

llmopt_status llmopt_hc_step(const double* y, const double* point, size_t d, double* out_point, int* improved) {
  return guarded([&] {
    require(point && out_point, "point and out_point are required");
    const auto instance = raw_instance(y, nullptr, d);
    const auto step = llmopt::hc_step(instance, llmopt::Solution(std::vector<double>(point, point + d)));
    copy_out(step.point, out_point);
    if (improved) *improved = step.improved ? 1 : 0;
  });
}

llmopt_status llmopt_grid_optimum(const double* y, size_t d, int low, int high, double* out_point) {
  return guarded([&] {
    require(out_point != nullptr, "out_point is required");
    copy_out(llmopt::grid_optimum(raw_instance(y, nullptr, d), low, high), out_point);
  });
}

llmopt_status llmopt_goal_metric(const double* init_losses, const double* final_losses, size_t n, double* out) {
  return guarded([&] {
    require(init_losses && out, "init_losses and out are required");
    *out = llmopt::goal_metric(raw_outcomes(init_losses, final_losses, n));
  });
}

llmopt_status llmopt_policy_metric(const double* final_losses, size_t n, double truth, double* out, int* present) {
  return guarded([&] {
    require(out && present, "out and present are required");
    const auto p = llmopt::policy_metric(raw_outcomes(nullptr, final_losses, n), truth);
    *present = p ? 1 : 0;
    *out = p.value_or(0.0);
  });
}

llmopt_status llmopt_uncertainty_metric(const double* final_losses, size_t n, double* out) {
  return guarded([&] {
    require(out != nullptr, "out is required");
    *out = llmopt::uncertainty_metric(raw_outcomes(nullptr, final_losses, n));
  });
}

llmopt_status llmopt_config_new(llmopt_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is NULL");
    *out = new llmopt_config{};
  });
}

llmopt_status llmopt_config_load(const char* path, llmopt_config** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    auto config = llmopt::load_experiment_config(path);
    auto tasks = config.tasks;
    *out = new llmopt_config{std::move(config), std::move(tasks)};
  });
}

llmopt_status llmopt_config_set_tasks(llmopt_config* config, const char* tasks) {
  return guarded([&] {
    require(config != nullptr && tasks != nullptr, "config and tasks are required");
    std::vector<llmopt::TaskConfig> selected;
    std::stringstream list(tasks);
    std::string name;
    while (std::getline(list, name, ',')) {
      if (name.empty()) continue;
      llmopt::TaskConfig cfg;
      cfg.task = llmopt::parse_task(name);
      for (const auto& known : config->from_file) {
        if (known.task == cfg.task) cfg = known;
      }
      selected.push_back(cfg);
    }
    config->value.tasks = std::move(selected);
  });
}

llmopt_status llmopt_config_set_backend(llmopt_config* config, const char* kind) {
  return guarded([&] {
    require(config != nullptr && kind != nullptr, "config and kind are required");
    config->value.backend.kind = llmopt::parse_backend_kind(kind);
  });
}

llmopt_status llmopt_config_set_script(llmopt_config* config, const char* path) {
  return guarded([&] {
    require(config != nullptr && path != nullptr, "config and path are required");
    config->value.backend.script_path = path;
  });
}

llmopt_status llmopt_config_set_parallelism(llmopt_config* config, int parallelism) {
  return guarded([&] {
    require(config != nullptr, "config is NULL");
    if (parallelism < 1) throw llmopt::Error(llmopt::ErrorCode::Config, "parallelism must be >= 1");
    config->value.parallelism = parallelism;
  });
}

llmopt_status llmopt_config_set_seed(llmopt_config* config, uint64_t seed) {
  return guarded([&] {
    require(config != nullptr, "config is NULL");
    config->value.seed = seed;
  });
}

llmopt_status llmopt_config_to_json(const llmopt_config* config, char** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "config and out are required");
    *out = dup_string(llmopt::to_json(config->value).dump(2));
  });
}

void llmopt_config_free(llmopt_config* config) { delete config; }

llmopt_status llmopt_run(const llmopt_dataset* dataset, const llmopt_config* config, const char* out_dir,
                         llmopt_report** out) {
  return guarded([&] {
    require(dataset && config && out, "dataset, config and out are required");
    auto factory = llmopt::make_backend_factory(config->value.backend);
    std::optional<std::filesystem::path> dir;
    if (out_dir != nullptr) dir = out_dir;
    *out = new llmopt_report{llmopt::run_experiment(dataset->value, config->value, *factory, dir)};
  });
}

llmopt_status llmopt_report_from_traces(const char* trace_dir, double divergence_factor, llmopt_report** out) {
  return guarded([&] {
    require(trace_dir && out, "trace_dir and out are required");
    require(divergence_factor > 0.0, "divergence_factor must be positive");
    const auto traces = llmopt::load_traces(trace_dir);
    llmopt::ExclusionRule rule;
    rule.divergence_factor = divergence_factor;
    auto report = llmopt::evaluate(traces, rule);
    report.manifest = {{"trace_dir", trace_dir}, {"traces", traces.size()}, {"warnings", report.warnings}};
    *out = new llmopt_report{std::move(report)};
  });
}

llmopt_status llmopt_oracle_traces(const llmopt_dataset* dataset, const llmopt_config* config, const char* out_dir,
                                   char** jsonl_out) {
  return guarded([&] {
    require(dataset && config, "dataset and config are required");
    std::string jsonl;
    for (const auto& cfg : config->value.tasks) {
      for (const auto& instance : dataset->value.instances) {
        const auto trace = llmopt::oracle_trial_trace(cfg, instance);
        if (out_dir != nullptr) llmopt::save_trace(out_dir, trace);
        if (jsonl_out != nullptr) jsonl += llmopt::trace_to_jsonl(trace);
      }
    }
    if (jsonl_out != nullptr) *jsonl_out = dup_string(jsonl);
  });
}

llmopt_status llmopt_report_emit(const llmopt_report* report, const char* dir, unsigned formats, char** paths_out) {
  return guarded([&] {
    require(report && dir, "report and dir are required");
    require(formats != 0 && (formats & ~(LLMOPT_FORMAT_CSV | LLMOPT_FORMAT_JSON)) == 0, "unknown report format");
    const auto paths = llmopt::emit_report(report->value.metrics, formats, dir);
    if (paths_out != nullptr) {
      std::string joined;
      for (const auto& p : paths) joined += p.string() + "\n";
      *paths_out = dup_string(joined);
    }
  });
}

llmopt_status llmopt_report_csv(const llmopt_report* report, char** out) {
  return guarded([&] {
    require(report && out, "report and out are required");
    *out = dup_string(llmopt::report_to_csv(report->value.metrics));
  });
}

llmopt_status llmopt_report_json(const llmopt_report* report, char** out) {
  return guarded([&] {
    require(report && out, "report and out are required");
    *out = dup_string(llmopt::report_to_json(report->value.metrics).dump(2));
  });
}

llmopt_status llmopt_report_manifest(const llmopt_report* report, char** out) {
  return guarded([&] {
    require(report && out, "report and out are required");
    *out = dup_string(report->value.manifest.dump(2));
  });
}

size_t llmopt_report_group_count(const llmopt_report* report) {
  return report ? report->value.metrics.groups.size() : 0;
}

size_t llmopt_report_trial_count(const llmopt_report* report) { return report ? report->value.outcomes.size() : 0; }

size_t llmopt_report_excluded_count(const llmopt_report* report) {
  if (report == nullptr) return 0;
  size_t n = 0;
  for (const auto& o : report->value.outcomes) n += o.outcome.excluded ? 1 : 0;
  return n;
}

size_t llmopt_report_warning_count(const llmopt_report* report) {
  return report ? report->value.warnings.size() : 0;
}

const char* llmopt_report_warning(const llmopt_report* report, size_t index) {
  if (report == nullptr || index >= report->value.warnings.size()) return nullptr;
  return report->value.warnings[index].c_str();
}

void llmopt_report_free(llmopt_report* report) { delete report; }

}  // extern "C"
