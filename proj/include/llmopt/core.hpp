#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace llmopt {

/// A candidate point (the predicted ŷ values). Entries are always finite.
class Solution {
 public:
  Solution() = default;
  explicit Solution(std::vector<double> values);
  Solution(std::initializer_list<double> values);

  [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Solution&) const = default;

 private:
  std::vector<double> values_;
};

/// One MSE loss landscape: data points y in [0,10]^d plus the starting point
/// shared by every trial and by the oracle reference run.
struct ProblemInstance {
  std::string id;
  std::vector<double> y;
  Solution init;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t dim() const noexcept { return y.size(); }
};

struct Dataset {
  std::uint64_t seed = 0;
  std::vector<ProblemInstance> instances;
};

using Rng = std::mt19937_64;

inline constexpr double kValueLow = 0.0;
inline constexpr double kValueHigh = 10.0;

// Checks the ProblemInstance invariants, throws Error on violation.
void validate(const ProblemInstance& instance);

/// (1/d) * sum_i (yhat_i - y_i)^2. Throws ErrorCode::ArityMismatch.
[[nodiscard]] double mse_loss(std::span<const double> y, std::span<const double> yhat);
[[nodiscard]] double mse_loss(const ProblemInstance& instance, const Solution& s);

// Portable draws: the standard distributions are implementation-defined, so
// dataset bytes would differ between standard libraries.
[[nodiscard]] double uniform_unit(Rng& rng);
[[nodiscard]] int uniform_int(Rng& rng, int low, int high);
[[nodiscard]] Solution random_integer_point(Rng& rng, std::size_t d, int low, int high);

[[nodiscard]] ProblemInstance make_instance(std::size_t d, Rng& rng, std::string id, std::uint64_t seed);
[[nodiscard]] Dataset gen_dataset(std::span<const std::size_t> dims, std::size_t per_dim, std::uint64_t seed);

/// Stable 64-bit stream key from (base seed, string key, index).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::string_view key, std::uint64_t index);

// Dataset file: JSON lines {id, d, y, init, seed}.
void write_dataset(std::ostream& out, const Dataset& dataset);
[[nodiscard]] std::string dataset_to_jsonl(const Dataset& dataset);
[[nodiscard]] Dataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const Dataset& dataset);
[[nodiscard]] Dataset load_dataset(const std::string& path);

/// Fixed six decimals with trailing zeros removed: 2 -> "2", 1.925 -> "1.925".
[[nodiscard]] std::string format_real(double v);
/// "(v1, v2, ...)" using format_real.
[[nodiscard]] std::string format_tuple(std::span<const double> values);
[[nodiscard]] inline std::string format_tuple(const Solution& s) { return format_tuple(s.values()); }
/// Round-trip exact (17 significant digits); used where precision must survive text.
[[nodiscard]] std::string format_exact(double v);

}  // namespace llmopt
