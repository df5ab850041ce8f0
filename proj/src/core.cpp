#include "llmopt/core.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "llmopt/error.hpp"
#include "llmopt/serialization.hpp"

namespace llmopt {

namespace {

void require_finite(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::InvalidArgument, "solution entry " + std::to_string(i) + " is not finite");
    }
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Solution::Solution(std::vector<double> values) : values_(std::move(values)) { require_finite(values_); }

Solution::Solution(std::initializer_list<double> values) : values_(values) { require_finite(values_); }

void validate(const ProblemInstance& instance) {
  const auto d = instance.dim();
  if (d == 0) {
    throw Error(ErrorCode::InvalidArgument, "instance '" + instance.id + "' has dimension 0");
  }
  if (instance.init.dim() != d) {
    throw Error(ErrorCode::ArityMismatch, "instance '" + instance.id + "': init has " +
                                              std::to_string(instance.init.dim()) + " entries, expected " +
                                              std::to_string(d));
  }
  for (double v : instance.y) {
    if (!(v >= kValueLow && v <= kValueHigh)) {
      throw Error(ErrorCode::InvalidArgument, "instance '" + instance.id + "': data point outside [0,10]");
    }
  }
}

double mse_loss(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw Error(ErrorCode::ArityMismatch, "arity mismatch: solution has " + std::to_string(yhat.size()) +
                                              " entries, instance has d=" + std::to_string(y.size()));
  }
  if (y.empty()) {
    throw Error(ErrorCode::ArityMismatch, "arity mismatch: empty solution");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double diff = yhat[i] - y[i];
    sum += diff * diff;
  }
  return sum / static_cast<double>(y.size());
}

double mse_loss(const ProblemInstance& instance, const Solution& s) { return mse_loss(instance.y, s.values()); }

double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int uniform_int(Rng& rng, int low, int high) {
  if (low > high) {
    throw Error(ErrorCode::InvalidArgument, "uniform_int: low > high");
  }
  const std::uint64_t span = static_cast<std::uint64_t>(high - low) + 1;
  const std::uint64_t limit = Rng::max() - Rng::max() % span;
  std::uint64_t draw = rng();
  while (draw >= limit) {
    draw = rng();
  }
  return low + static_cast<int>(draw % span);
}

Solution random_integer_point(Rng& rng, std::size_t d, int low, int high) {
  std::vector<double> values(d);
  for (auto& v : values) {
    v = uniform_int(rng, low, high);
  }
  return Solution(std::move(values));
}

ProblemInstance make_instance(std::size_t d, Rng& rng, std::string id, std::uint64_t seed) {
  if (d == 0) {
    throw Error(ErrorCode::InvalidArgument, "make_instance: d must be >= 1");
  }
  ProblemInstance instance;
  instance.id = std::move(id);
  instance.seed = seed;
  instance.y.resize(d);
  for (auto& v : instance.y) {
    v = kValueLow + (kValueHigh - kValueLow) * uniform_unit(rng);
  }
  instance.init = random_integer_point(rng, d, static_cast<int>(kValueLow), static_cast<int>(kValueHigh));
  return instance;
}

Dataset gen_dataset(std::span<const std::size_t> dims, std::size_t per_dim, std::uint64_t seed) {
  if (dims.empty()) {
    throw Error(ErrorCode::InvalidArgument, "gen_dataset: dims must be non-empty");
  }
  Dataset dataset;
  dataset.seed = seed;
  Rng rng(seed);
  std::size_t counter = 0;
  for (std::size_t d : dims) {
    for (std::size_t k = 0; k < per_dim; ++k, ++counter) {
      char id[64];
      std::snprintf(id, sizeof id, "s%llu-d%zu-%04zu", static_cast<unsigned long long>(seed), d, counter);
      dataset.instances.push_back(make_instance(d, rng, id, seed));
    }
  }
  return dataset;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view key, std::uint64_t index) {
  // FNV-1a over the key, then mixed with base and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(base ^ h) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

nlohmann::json to_json(const Solution& s) {
  return nlohmann::json(std::vector<double>(s.values().begin(), s.values().end()));
}

Solution solution_from_json(const nlohmann::json& j) { return Solution(j.get<std::vector<double>>()); }

nlohmann::json to_json(const ProblemInstance& instance) {
  nlohmann::json out;
  out["id"] = instance.id;
  out["d"] = instance.dim();
  out["y"] = instance.y;
  out["init"] = to_json(instance.init);
  out["seed"] = instance.seed;
  return out;
}

ProblemInstance instance_from_json(const nlohmann::json& j) {
  ProblemInstance instance;
  try {
    instance.id = j.at("id").get<std::string>();
    instance.y = j.at("y").get<std::vector<double>>();
    instance.init = solution_from_json(j.at("init"));
    instance.seed = j.value("seed", std::uint64_t{0});
    const auto d = j.at("d").get<std::size_t>();
    if (d != instance.y.size()) {
      throw Error(ErrorCode::ArityMismatch, "instance '" + instance.id + "': d does not match len(y)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed instance record: ") + e.what());
  }
  validate(instance);
  return instance;
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& instance : dataset.instances) {
    out << to_json(instance).dump() << '\n';
  }
}

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::ostringstream out;
  write_dataset(out, dataset);
  return out.str();
}

Dataset read_dataset(std::istream& in) {
  Dataset dataset;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, "dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    auto instance = instance_from_json(j);
    if (first) {
      dataset.seed = instance.seed;
      first = false;
    }
    dataset.instances.push_back(std::move(instance));
  }
  return dataset;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
  }
  write_dataset(out, dataset);
  if (!out) {
    throw Error(ErrorCode::Io, "write failed: " + path);
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  }
  return read_dataset(in);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') {
      s.pop_back();
    }
    if (s.back() == '.') {
      s.pop_back();
    }
  }
  if (s == "-0") {
    s = "0";
  }
  return s;
}

std::string format_tuple(std::span<const double> values) {
  std::string out = "(";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    out += format_real(values[i]);
  }
  out += ')';
  return out;
}

std::string format_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace llmopt
