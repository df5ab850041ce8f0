#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "llmopt/llmopt.h"

namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  llmopt_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("llmopt_capi_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("numeric entry points") {
  const double y[] = {2, 6, 0};
  const double p[] = {10, 10, 10};
  double loss = 0;
  REQUIRE(llmopt_mse_loss(y, p, 3, &loss) == LLMOPT_OK);
  CHECK(loss == 60.0);

  const double start[] = {2, 3, 4};
  double next[3];
  REQUIRE(llmopt_gd_step(y, start, 3, 0.1, next) == LLMOPT_OK);
  CHECK(next[1] == doctest::Approx(3.2));

  int improved = 0;
  REQUIRE(llmopt_hc_step(y, p, 3, next, &improved) == LLMOPT_OK);
  CHECK(improved == 1);
  CHECK(next[2] == 9.0);

  REQUIRE(llmopt_grid_optimum(y, 3, 2, 3, next) == LLMOPT_OK);
  CHECK(next[0] == 2.0);
  CHECK(next[1] == 3.0);
  CHECK(next[2] == 2.0);

  const double inits[] = {10, 10};
  const double finals[] = {10, 0};
  double g = 0;
  REQUIRE(llmopt_goal_metric(inits, finals, 2, &g) == LLMOPT_OK);
  CHECK(g == doctest::Approx(0.5));
  const double pf[] = {6, 2};
  double pm = 1;
  int present = 0;
  REQUIRE(llmopt_policy_metric(pf, 2, 4, &pm, &present) == LLMOPT_OK);
  CHECK(present == 1);
  CHECK(std::abs(pm) < 1e-12);
  REQUIRE(llmopt_policy_metric(pf, 2, 0, &pm, &present) == LLMOPT_OK);
  CHECK(present == 0);
  const double uf[] = {1, 3};
  double u = 0;
  REQUIRE(llmopt_uncertainty_metric(uf, 2, &u) == LLMOPT_OK);
  CHECK(u == doctest::Approx(1.0));
}

TEST_CASE("errors carry codes and messages") {
  CHECK(llmopt_mse_loss(nullptr, nullptr, 3, nullptr) == LLMOPT_ERR_INVALID_ARGUMENT);
  CHECK(std::strlen(llmopt_last_error()) > 0);
  const double zero[] = {0};
  double g;
  CHECK(llmopt_goal_metric(zero, zero, 1, &g) == LLMOPT_ERR_UNDEFINED_METRIC);
  llmopt_dataset* ds = nullptr;
  CHECK(llmopt_dataset_load("/nonexistent/file.jsonl", &ds) == LLMOPT_ERR_IO);
  CHECK(ds == nullptr);
  CHECK(std::string(llmopt_status_name(LLMOPT_ERR_PARSE)).size() > 0);
  llmopt_config* cfg = nullptr;
  REQUIRE(llmopt_config_new(&cfg) == LLMOPT_OK);
  CHECK(llmopt_config_set_tasks(cfg, "gd,newton") != LLMOPT_OK);
  CHECK(llmopt_config_set_backend(cfg, "telepathy") != LLMOPT_OK);
  CHECK(llmopt_config_set_parallelism(cfg, 0) != LLMOPT_OK);
  llmopt_config_free(cfg);
}

TEST_CASE("dataset, run and report through the C API") {
  const auto dir = fresh_dir("run");
  const size_t dims[] = {3, 6};
  llmopt_dataset* ds = nullptr;
  REQUIRE(llmopt_dataset_generate(dims, 2, 2, 12, &ds) == LLMOPT_OK);
  CHECK(llmopt_dataset_size(ds) == 4);
  CHECK(llmopt_dataset_dim(ds, 3) == 6);
  CHECK(llmopt_dataset_dim(ds, 9) == 0);
  REQUIRE(llmopt_dataset_save(ds, (dir / "ds.jsonl").c_str()) == LLMOPT_OK);
  char* text = nullptr;
  REQUIRE(llmopt_dataset_to_jsonl(ds, &text) == LLMOPT_OK);
  CHECK(take(text) == slurp(dir / "ds.jsonl"));

  llmopt_config* cfg = nullptr;
  REQUIRE(llmopt_config_new(&cfg) == LLMOPT_OK);
  REQUIRE(llmopt_config_set_tasks(cfg, "gd,hc,grid,bb") == LLMOPT_OK);
  REQUIRE(llmopt_config_set_parallelism(cfg, 3) == LLMOPT_OK);
  char* cfg_json = nullptr;
  REQUIRE(llmopt_config_to_json(cfg, &cfg_json) == LLMOPT_OK);
  CHECK(take(cfg_json).find("perfect-oracle") != std::string::npos);

  llmopt_report* report = nullptr;
  REQUIRE(llmopt_run(ds, cfg, (dir / "out").c_str(), &report) == LLMOPT_OK);
  CHECK(llmopt_report_group_count(report) == 8);
  CHECK(llmopt_report_trial_count(report) == 4 * 4 * 5);
  CHECK(llmopt_report_excluded_count(report) == 0);
  char* paths = nullptr;
  REQUIRE(llmopt_report_emit(report, (dir / "out").c_str(), LLMOPT_FORMAT_CSV | LLMOPT_FORMAT_JSON, &paths) ==
          LLMOPT_OK);
  CHECK(take(paths).find("metrics.json") != std::string::npos);
  char* csv = nullptr;
  REQUIRE(llmopt_report_csv(report, &csv) == LLMOPT_OK);
  const std::string csv_text = take(csv);
  CHECK(csv_text == slurp(dir / "out" / "metrics.csv"));
  char* manifest = nullptr;
  REQUIRE(llmopt_report_manifest(report, &manifest) == LLMOPT_OK);
  CHECK(take(manifest).find("started_at") != std::string::npos);
  llmopt_report_free(report);

  llmopt_report* again = nullptr;
  REQUIRE(llmopt_report_from_traces((dir / "out" / "traces").c_str(), 10.0, &again) == LLMOPT_OK);
  char* csv2 = nullptr;
  REQUIRE(llmopt_report_csv(again, &csv2) == LLMOPT_OK);
  CHECK(take(csv2) == csv_text);
  llmopt_report_free(again);

  REQUIRE(llmopt_config_set_tasks(cfg, "gd,grid") == LLMOPT_OK);
  char* oracle = nullptr;
  REQUIRE(llmopt_oracle_traces(ds, cfg, nullptr, &oracle) == LLMOPT_OK);
  const std::string oracle_text = take(oracle);
  CHECK(oracle_text.find("\"source\":\"oracle\"") != std::string::npos);
  REQUIRE(llmopt_config_set_tasks(cfg, "bb") == LLMOPT_OK);
  CHECK(llmopt_oracle_traces(ds, cfg, nullptr, &oracle) == LLMOPT_ERR_NO_GROUND_TRUTH);

  llmopt_config_free(cfg);
  llmopt_dataset_free(ds);
}

TEST_CASE("config files never carry API keys") {
  const auto dir = fresh_dir("cfg");
  std::ofstream(dir / "bad.json") << R"({"backend": {"kind": "http", "api_key": "sk-123"}})";
  llmopt_config* cfg = nullptr;
  CHECK(llmopt_config_load((dir / "bad.json").c_str(), &cfg) == LLMOPT_ERR_CONFIG);
  std::ofstream(dir / "good.json") << R"({"seed": 4, "tasks": [{"task": "gd", "iterations": 2, "trials": 2}]})";
  REQUIRE(llmopt_config_load((dir / "good.json").c_str(), &cfg) == LLMOPT_OK);
  REQUIRE(llmopt_config_set_tasks(cfg, "gd,hc") == LLMOPT_OK);
  char* json = nullptr;
  REQUIRE(llmopt_config_to_json(cfg, &json) == LLMOPT_OK);
  const std::string text = take(json);
  CHECK(text.find("\"iterations\": 2") != std::string::npos);
  CHECK(text.find("hill_climbing") != std::string::npos);
  llmopt_config_free(cfg);
}

TEST_CASE("CLI smoke test") {
  const char* cli = std::getenv("LLMOPT_CLI");
  if (cli == nullptr) {
    MESSAGE("LLMOPT_CLI not set, skipping");
    return;
  }
  const auto dir = fresh_dir("cli");
  const std::string bin = std::string("\"") + cli + "\"";
  const std::string d = dir.string();
  CHECK(std::system((bin + " gen-dataset --dims 3,6 --per-dim 1 --seed 3 --out " + d + "/ds.jsonl").c_str()) == 0);
  CHECK(std::system((bin + " run --dataset " + d + "/ds.jsonl --tasks gd,grid --backend perfect-oracle --out " + d +
                     "/run --parallelism 2 > /dev/null")
                        .c_str()) == 0);
  CHECK(fs::exists(dir / "run" / "metrics.csv"));
  CHECK(fs::exists(dir / "run" / "manifest.json"));
  CHECK(std::system((bin + " report --traces " + d + "/run/traces --format csv --out " + d + "/rep > /dev/null")
                        .c_str()) == 0);
  CHECK(slurp(dir / "rep" / "metrics.csv") == slurp(dir / "run" / "metrics.csv"));
  CHECK(std::system((bin + " oracle --dataset " + d + "/ds.jsonl --tasks hc --out " + d + "/oracle > /dev/null")
                        .c_str()) == 0);
  CHECK(std::system((bin + " oracle --dataset " + d + "/ds.jsonl --tasks bb > /dev/null 2>&1").c_str()) != 0);
  CHECK(std::system((bin + " run --dataset " + d + "/missing.jsonl --out " + d + "/x > /dev/null 2>&1").c_str()) != 0);
}
