#include <algorithm>
#include <fstream>
#include <sstream>

#include "llmopt/error.hpp"
#include "llmopt/runner.hpp"
#include "llmopt/serialization.hpp"

namespace llmopt {

namespace {

PointOrigin parse_origin(const std::string& name) {
  if (name == "init") return PointOrigin::Init;
  if (name == "seed") return PointOrigin::Seed;
  return PointOrigin::Model;
}

}  // namespace

nlohmann::json trace_header_json(const TrialTrace& trace) {
  return {{"type", "header"},
          {"source", trace.source},
          {"task", task_name(trace.config.task)},
          {"sample_id", trace.instance.id},
          {"trial", trace.trial_index},
          {"backend", trace.backend},
          {"instance", to_json(trace.instance)},
          {"config", to_json(trace.config)}};
}

nlohmann::json iteration_json(const IterationRecord& record) {
  nlohmann::json exchanges = nlohmann::json::array();
  for (const auto& ex : record.exchanges) {
    nlohmann::json e{{"template", template_name(ex.template_id)},
                     {"prompt", ex.prompt},
                     {"replies", ex.replies},
                     {"chosen", ex.chosen},
                     {"evicted_total", ex.evicted_total}};
    if (!ex.raw_request.empty()) e["raw_request"] = ex.raw_request;
    if (!ex.raw_response.empty()) e["raw_response"] = ex.raw_response;
    if (ex.error) e["error"] = *ex.error;
    exchanges.push_back(std::move(e));
  }
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : record.points) {
    points.push_back({{"solution", to_json(p.solution)}, {"loss", p.loss}, {"origin", origin_name(p.origin)}});
  }
  return {{"type", "iteration"},
          {"iteration", record.iteration},
          {"exchanges", std::move(exchanges)},
          {"points", std::move(points)}};
}

nlohmann::json outcome_json(const TrialTrace& trace) {
  const auto& o = trace.outcome;
  return {{"type", "outcome"},
          {"sample_id", o.sample_id},
          {"trial", o.trial_index},
          {"init_loss", o.init_loss},
          {"final_loss", o.final_loss},
          {"final_solution", trace.final_solution ? to_json(*trace.final_solution) : nlohmann::json(nullptr)},
          {"failed", o.failed},
          {"reason", o.reason}};
}

std::string trace_to_jsonl(const TrialTrace& trace) {
  std::string out = trace_header_json(trace).dump() + "\n";
  for (const auto& rec : trace.iterations) out += iteration_json(rec).dump() + "\n";
  if (trace.complete) out += outcome_json(trace).dump() + "\n";
  return out;
}

TrialTrace trace_from_jsonl(std::string_view text) {
  TrialTrace trace;
  bool have_header = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        trace.source = j.at("source").get<std::string>();
        trace.trial_index = j.at("trial").get<int>();
        trace.backend = j.value("backend", std::string{});
        trace.instance = instance_from_json(j.at("instance"));
        trace.config = task_config_from_json(j.at("config"));
        trace.outcome.sample_id = trace.instance.id;
        trace.outcome.trial_index = trace.trial_index;
        have_header = true;
      } else if (!have_header) {
        throw Error(ErrorCode::InvalidArgument, "trace line " + std::to_string(lineno) + " precedes the header");
      } else if (type == "iteration") {
        IterationRecord rec;
        rec.iteration = j.at("iteration").get<int>();
        for (const auto& e : j.at("exchanges")) {
          Exchange ex;
          ex.template_id = parse_template_name(e.at("template").get<std::string>());
          ex.prompt = e.at("prompt").get<std::string>();
          ex.replies = e.at("replies").get<std::vector<std::string>>();
          ex.chosen = e.value("chosen", std::size_t{0});
          ex.raw_request = e.value("raw_request", std::string{});
          ex.raw_response = e.value("raw_response", std::string{});
          ex.evicted_total = e.value("evicted_total", std::size_t{0});
          if (e.contains("error")) ex.error = e["error"].get<std::string>();
          rec.exchanges.push_back(std::move(ex));
        }
        for (const auto& p : j.at("points")) {
          rec.points.push_back({solution_from_json(p.at("solution")), p.at("loss").get<double>(),
                                parse_origin(p.at("origin").get<std::string>())});
        }
        trace.iterations.push_back(std::move(rec));
      } else if (type == "outcome") {
        auto& o = trace.outcome;
        o.init_loss = j.at("init_loss").get<double>();
        o.final_loss = j.at("final_loss").get<double>();
        o.failed = j.at("failed").get<bool>();
        o.reason = j.value("reason", std::string{});
        if (!j.at("final_solution").is_null()) trace.final_solution = solution_from_json(j["final_solution"]);
        trace.complete = true;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "trace line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!have_header) {
    throw Error(ErrorCode::InvalidArgument, "trace has no header record");
  }
  if (!trace.complete) {
    // Partial trace from an aborted run: score what was visited, flagged as failed.
    trace.outcome.init_loss = mse_loss(trace.instance, trace.instance.init);
    trace.outcome.final_loss = trace.outcome.init_loss;
    const auto points = trace.visited();
    if (!points.empty()) trace.outcome.final_loss = points.back().loss;
    trace.outcome.failed = true;
    trace.outcome.reason = "incomplete trace";
  }
  return trace;
}

JsonlTraceWriter::JsonlTraceWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path JsonlTraceWriter::path_for(const std::filesystem::path& dir, const TrialTrace& trace) {
  return dir / std::string(task_name(trace.config.task)) /
         (trace.instance.id + ".t" + std::to_string(trace.trial_index) + ".jsonl");
}

void JsonlTraceWriter::write_line(const TrialTrace& trace, const nlohmann::json& j, bool truncate) {
  const auto path = path_for(dir_, trace);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app));
  if (!out) throw Error(ErrorCode::Io, "cannot open trace '" + path.string() + "'");
  out << j.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

void JsonlTraceWriter::begin(const TrialTrace& trace) { write_line(trace, trace_header_json(trace), true); }

void JsonlTraceWriter::iteration(const TrialTrace& trace, const IterationRecord& record) {
  write_line(trace, iteration_json(record), false);
}

void JsonlTraceWriter::end(const TrialTrace& trace) { write_line(trace, outcome_json(trace), false); }

void save_trace(const std::filesystem::path& dir, const TrialTrace& trace) {
  const auto path = JsonlTraceWriter::path_for(dir, trace);
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open trace '" + path.string() + "'");
  out << trace_to_jsonl(trace);
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

std::vector<TrialTrace> load_traces(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Io, "trace directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TrialTrace> traces;
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open trace '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
      traces.push_back(trace_from_jsonl(buf.str()));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.what());
    }
  }
  return traces;
}

}  // namespace llmopt
