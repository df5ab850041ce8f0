#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "llmopt/core.hpp"

namespace llmopt {

enum class TemplateId { DefineLoss, GdStep, GridCreate, GridSelect, HcGenerate, HcSelect, BlackBoxGuess };

inline constexpr std::array kAllTemplates{TemplateId::DefineLoss, TemplateId::GdStep,   TemplateId::GridCreate,
                                          TemplateId::GridSelect, TemplateId::HcGenerate, TemplateId::HcSelect,
                                          TemplateId::BlackBoxGuess};

[[nodiscard]] std::string_view template_name(TemplateId id) noexcept;
[[nodiscard]] TemplateId parse_template_name(std::string_view name);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Prompt bodies with `{name}` placeholders. Defaults are built in; a
/// directory of `<TemplateName>.txt` files overrides individual entries.
class TemplateRegistry {
 public:
  TemplateRegistry();

  [[nodiscard]] static TemplateRegistry load(const std::filesystem::path& dir);

  [[nodiscard]] const std::string& body(TemplateId id) const;
  /// Format hint appended when a reply has to be re-requested.
  [[nodiscard]] const std::string& reminder(TemplateId id) const;
  void set_body(TemplateId id, std::string body);

  /// Substitutes every placeholder. Throws InvalidArgument naming the first
  /// placeholder without a binding.
  [[nodiscard]] std::string render(TemplateId id, const Bindings& bindings) const;

 private:
  std::map<TemplateId, std::string> bodies_;
  std::map<TemplateId, std::string> reminders_;
};

/// Placeholder names referenced by a template body, in order of appearance.
[[nodiscard]] std::vector<std::string> placeholders(std::string_view body);

/// "f(2,4,6) = 10, f(1,5,0) = 2" in chronological order.
struct HistoryEntry {
  Solution solution;
  double loss = 0.0;
};
[[nodiscard]] std::string format_history(std::span<const HistoryEntry> history);

/// Last parenthesised or bracketed numeric tuple of arity d in `text`.
/// Throws ErrorCode::Parse when none exists.
[[nodiscard]] Solution parse_point(std::string_view text, std::size_t d);

/// Last bracketed list of arity-d tuples. An empty list "[]" parses to an
/// empty vector; a malformed element raises a Parse error naming its position.
[[nodiscard]] std::vector<Solution> parse_point_list(std::string_view text, std::size_t d);

/// Majority vote over candidates clustered by max-abs distance <= tol.
/// Largest cluster wins; ties go to the lower loss, then the earliest.
[[nodiscard]] Solution self_consistent_choice(std::span<const Solution> candidates,
                                              const std::function<double(const Solution&)>& loss,
                                              double tol = 1e-6);
/// Index of the chosen candidate, for callers that need the matching raw reply.
[[nodiscard]] std::size_t self_consistent_index(std::span<const Solution> candidates,
                                                const std::function<double(const Solution&)>& loss,
                                                double tol = 1e-6);

}  // namespace llmopt
