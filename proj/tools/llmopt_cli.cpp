// llmopt-bench: command line front end over the C API.
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "llmopt/llmopt.h"

namespace {

struct CString {
  char* ptr = nullptr;
  ~CString() { llmopt_string_free(ptr); }
};

using Dataset = std::unique_ptr<llmopt_dataset, decltype(&llmopt_dataset_free)>;
using Config = std::unique_ptr<llmopt_config, decltype(&llmopt_config_free)>;
using Report = std::unique_ptr<llmopt_report, decltype(&llmopt_report_free)>;

class CliError : public std::runtime_error {
 public:
  explicit CliError(llmopt_status status)
      : std::runtime_error(std::string(llmopt_status_name(status)) + ": " + llmopt_last_error()), status(status) {}
  llmopt_status status;
};

void check(llmopt_status status) {
  if (status != LLMOPT_OK) throw CliError(status);
}

unsigned parse_formats(const std::string& list) {
  unsigned formats = 0;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "csv") {
      formats |= LLMOPT_FORMAT_CSV;
    } else if (item == "json") {
      formats |= LLMOPT_FORMAT_JSON;
    } else if (!item.empty()) {
      throw CLI::ValidationError("--format", "unknown format '" + item + "'");
    }
  }
  if (formats == 0) throw CLI::ValidationError("--format", "no format given");
  return formats;
}

Dataset load_dataset(const std::string& path) {
  llmopt_dataset* raw = nullptr;
  check(llmopt_dataset_load(path.c_str(), &raw));
  return Dataset(raw, llmopt_dataset_free);
}

Config make_config(const std::optional<std::string>& path) {
  llmopt_config* raw = nullptr;
  check(path ? llmopt_config_load(path->c_str(), &raw) : llmopt_config_new(&raw));
  return Config(raw, llmopt_config_free);
}

void print_summary(const llmopt_report* report, const std::string& paths) {
  std::cout << "trials: " << llmopt_report_trial_count(report)
            << ", excluded: " << llmopt_report_excluded_count(report)
            << ", groups: " << llmopt_report_group_count(report) << "\n";
  for (size_t i = 0; i < llmopt_report_warning_count(report); ++i) {
    std::cerr << "warning: " << llmopt_report_warning(report, i) << "\n";
  }
  std::cout << paths;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark harness for language models acting as iterative optimizers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", llmopt_version());

  // gen-dataset
  auto* gen = app.add_subcommand("gen-dataset", "Generate a synthetic dataset (JSON lines)");
  std::vector<size_t> dims{3, 6, 12, 24, 48};
  size_t per_dim = 1;
  uint64_t seed = 0;
  std::string dataset_out;
  gen->add_option("--dims", dims, "Problem dimensions")->delimiter(',')->check(CLI::PositiveNumber);
  gen->add_option("--per-dim", per_dim, "Instances per dimension");
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--out", dataset_out, "Output file")->required();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment and write traces plus metrics");
  std::string dataset_path;
  std::string tasks = "gd,hc,grid,bb";
  std::optional<std::string> backend;
  std::optional<std::string> config_path;
  std::optional<std::string> script_path;
  std::optional<uint64_t> run_seed;
  std::string run_out;
  std::optional<int> parallelism;
  std::string run_formats = "csv,json";
  run->add_option("--dataset", dataset_path, "Dataset file")->required()->check(CLI::ExistingFile);
  run->add_option("--tasks", tasks, "Comma-separated tasks: gd,hc,grid,bb");
  run->add_option("--backend", backend, "http | scripted | perfect-oracle");
  run->add_option("--config", config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--script", script_path, "Reply script for the scripted backend")->check(CLI::ExistingFile);
  run->add_option("--seed", run_seed, "Experiment seed (black-box starting history)");
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_option("--parallelism", parallelism, "Concurrent trials")->check(CLI::PositiveNumber);
  run->add_option("--format", run_formats, "Report formats: csv,json");

  // report
  auto* report = app.add_subcommand("report", "Recompute metrics from a trace directory");
  std::string traces_dir;
  std::string report_formats = "csv,json";
  std::optional<std::string> report_out;
  double divergence = 10.0;
  report->add_option("--traces", traces_dir, "Trace directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--format", report_formats, "Report formats: csv,json");
  report->add_option("--out", report_out, "Output directory (default: the trace directory)");
  report->add_option("--divergence-factor", divergence, "Exclude trials with final > k * initial loss");

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Emit reference traces from the exact algorithms");
  std::string oracle_dataset;
  std::string oracle_tasks = "gd,hc,grid";
  std::optional<std::string> oracle_config;
  std::optional<std::string> oracle_out;
  oracle->add_option("--dataset", oracle_dataset, "Dataset file")->required()->check(CLI::ExistingFile);
  oracle->add_option("--tasks", oracle_tasks, "Comma-separated tasks: gd,hc,grid");
  oracle->add_option("--config", oracle_config, "Experiment config (JSON) for task parameters")
      ->check(CLI::ExistingFile);
  oracle->add_option("--out", oracle_out, "Trace directory (default: JSON lines on stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      llmopt_dataset* raw = nullptr;
      check(llmopt_dataset_generate(dims.data(), dims.size(), per_dim, seed, &raw));
      Dataset dataset(raw, llmopt_dataset_free);
      check(llmopt_dataset_save(dataset.get(), dataset_out.c_str()));
      std::cout << "wrote " << llmopt_dataset_size(dataset.get()) << " instances to " << dataset_out << "\n";
    } else if (*run) {
      const unsigned formats = parse_formats(run_formats);
      auto dataset = load_dataset(dataset_path);
      auto config = make_config(config_path);
      check(llmopt_config_set_tasks(config.get(), tasks.c_str()));
      if (backend) check(llmopt_config_set_backend(config.get(), backend->c_str()));
      if (script_path) check(llmopt_config_set_script(config.get(), script_path->c_str()));
      if (parallelism) check(llmopt_config_set_parallelism(config.get(), *parallelism));
      if (run_seed) check(llmopt_config_set_seed(config.get(), *run_seed));
      llmopt_report* raw = nullptr;
      check(llmopt_run(dataset.get(), config.get(), run_out.c_str(), &raw));
      Report result(raw, llmopt_report_free);
      CString paths;
      check(llmopt_report_emit(result.get(), run_out.c_str(), formats, &paths.ptr));
      print_summary(result.get(), paths.ptr);
    } else if (*report) {
      const unsigned formats = parse_formats(report_formats);
      llmopt_report* raw = nullptr;
      check(llmopt_report_from_traces(traces_dir.c_str(), divergence, &raw));
      Report result(raw, llmopt_report_free);
      CString paths;
      check(llmopt_report_emit(result.get(), report_out.value_or(traces_dir).c_str(), formats, &paths.ptr));
      print_summary(result.get(), paths.ptr);
    } else if (*oracle) {
      auto dataset = load_dataset(oracle_dataset);
      auto config = make_config(oracle_config);
      check(llmopt_config_set_tasks(config.get(), oracle_tasks.c_str()));
      if (oracle_out) {
        check(llmopt_oracle_traces(dataset.get(), config.get(), oracle_out->c_str(), nullptr));
        std::cout << "wrote reference traces to " << *oracle_out << "\n";
      } else {
        CString jsonl;
        check(llmopt_oracle_traces(dataset.get(), config.get(), nullptr, &jsonl.ptr));
        std::fputs(jsonl.ptr, stdout);
      }
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return 0;
}
