#include "llmopt/prompts.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "llmopt/error.hpp"

namespace llmopt {

namespace {

struct BuiltinTemplate {
  TemplateId id;
  const char* body;
};

constexpr BuiltinTemplate kBuiltinTemplates[] = {
#include "builtin_templates.inc"
};

// Answer-format lines appended on a re-ask.
std::string default_reminder(TemplateId id) {
  switch (id) {
    case TemplateId::DefineLoss:
      return "Please state the MSE loss function explicitly.";
    case TemplateId::GdStep:
      return "Please end with: Short Answer: After calculation, the next update point is (^y1_new, ^y2_new, ...) = "
             "(v1, v2, ...)";
    case TemplateId::GridCreate:
      return "Please end with: List : [write all the combinations here]";
    case TemplateId::GridSelect:
      return "Please end with: List : [write the combination with smallest MSE loss]";
    case TemplateId::HcGenerate:
      return "Please end with: List : [write neighbor solutions here]";
    case TemplateId::HcSelect:
      return "Please end with: List : [write best neighbor solution here]";
    case TemplateId::BlackBoxGuess:
      return "Please answer in the form: (^y1, ^y2,....) = [your answer]";
  }
  return {};
}

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }

// Replaces '$' (LaTeX math) with spaces and U+2212 minus with '-'.
std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 3, "\xE2\x88\x92") == 0) {
      out += '-';
      i += 2;
    } else if (text[i] == '$') {
      out += ' ';
    } else {
      out += text[i];
    }
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') {
    token.remove_prefix(1);
  }
  if (token.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

// Comma-separated numbers, or nullopt if any field is not a number.
std::optional<std::vector<double>> parse_numbers(std::string_view content) {
  std::vector<double> values;
  std::size_t start = 0;
  while (true) {
    const auto comma = content.find(',', start);
    auto v = parse_number(content.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (!v) return std::nullopt;
    values.push_back(*v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return values;
}

bool is_open(char c) { return c == '(' || c == '['; }
bool is_close(char c) { return c == ')' || c == ']'; }

std::string arity_message(std::size_t d) { return "no numeric tuple of arity " + std::to_string(d) + " found"; }

}  // namespace

std::string_view template_name(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::DefineLoss:
      return "DefineLoss";
    case TemplateId::GdStep:
      return "GdStep";
    case TemplateId::GridCreate:
      return "GridCreate";
    case TemplateId::GridSelect:
      return "GridSelect";
    case TemplateId::HcGenerate:
      return "HcGenerate";
    case TemplateId::HcSelect:
      return "HcSelect";
    case TemplateId::BlackBoxGuess:
      return "BlackBoxGuess";
  }
  return "Unknown";
}

TemplateId parse_template_name(std::string_view name) {
  for (auto id : kAllTemplates) {
    if (template_name(id) == name) return id;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown template '" + std::string(name) + "'");
}

TemplateRegistry::TemplateRegistry() {
  for (const auto& t : kBuiltinTemplates) {
    bodies_[t.id] = t.body;
  }
  for (auto id : kAllTemplates) {
    reminders_[id] = default_reminder(id);
  }
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
  TemplateRegistry registry;
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::Config, "template directory '" + dir.string() + "' does not exist");
  }
  for (auto id : kAllTemplates) {
    const auto path = dir / (std::string(template_name(id)) + ".txt");
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw Error(ErrorCode::Io, "cannot read template '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    registry.set_body(id, std::string(trim(buf.str())));
  }
  return registry;
}

const std::string& TemplateRegistry::body(TemplateId id) const { return bodies_.at(id); }

const std::string& TemplateRegistry::reminder(TemplateId id) const { return reminders_.at(id); }

void TemplateRegistry::set_body(TemplateId id, std::string body) {
  if (trim(body).empty()) {
    throw Error(ErrorCode::Config, "template " + std::string(template_name(id)) + " is empty");
  }
  bodies_[id] = std::move(body);
}

std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < body.size() && is_placeholder_char(body[j])) ++j;
    if (j < body.size() && body[j] == '}' && j > i + 1) {
      out.emplace_back(body.substr(i + 1, j - i - 1));
      i = j;
    }
  }
  return out;
}

std::string TemplateRegistry::render(TemplateId id, const Bindings& bindings) const {
  const std::string& tmpl = body(id);
  std::string out;
  out.reserve(tmpl.size() + 64);
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_placeholder_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        const auto name = std::string_view(tmpl).substr(i + 1, j - i - 1);
        const auto it = bindings.find(name);
        if (it == bindings.end()) {
          throw Error(ErrorCode::InvalidArgument, "template " + std::string(template_name(id)) +
                                                      ": missing binding for placeholder {" + std::string(name) + "}");
        }
        out += it->second;
        i = j;
        continue;
      }
    }
    out += tmpl[i];
  }
  return out;
}

std::string format_history(std::span<const HistoryEntry> history) {
  std::string out;
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (k > 0) out += ", ";
    out += "f(";
    const auto values = history[k].solution.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) out += ',';
      out += format_real(values[i]);
    }
    out += ") = " + format_real(history[k].loss);
  }
  return out;
}

Solution parse_point(std::string_view raw, std::size_t d) {
  if (d == 0) {
    throw Error(ErrorCode::InvalidArgument, "parse_point: d must be >= 1");
  }
  const std::string text = normalize(raw);
  std::optional<std::vector<double>> last;
  std::size_t open = std::string::npos;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_open(text[i])) {
      open = i;
    } else if (is_close(text[i]) && open != std::string::npos) {
      auto values = parse_numbers(std::string_view(text).substr(open + 1, i - open - 1));
      if (values && values->size() == d) {
        last = std::move(values);
      }
      open = std::string::npos;
    }
  }
  if (!last) {
    throw Error(ErrorCode::Parse, arity_message(d));
  }
  return Solution(std::move(*last));
}

std::vector<Solution> parse_point_list(std::string_view raw, std::size_t d) {
  if (d == 0) {
    throw Error(ErrorCode::InvalidArgument, "parse_point_list: d must be >= 1");
  }
  const std::string text = normalize(raw);
  std::optional<std::string_view> list;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '[') continue;
    int depth = 0;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      if (text[j] == '[') ++depth;
      if (text[j] == ']' && --depth == 0) break;
    }
    if (j >= text.size()) break;
    const auto content = trim(std::string_view(text).substr(i + 1, j - i - 1));
    if (content.empty() || is_open(content.front())) {
      list = content;
    }
    i = j;
  }
  if (!list) {
    throw Error(ErrorCode::Parse, "no bracketed list of tuples found");
  }
  std::vector<Solution> out;
  std::string_view rest = *list;
  std::size_t position = 0;
  while (!(rest = trim(rest)).empty()) {
    const auto malformed = [&](const std::string& why) {
      return Error(ErrorCode::Parse, "malformed tuple at position " + std::to_string(position) + ": " + why);
    };
    if (!is_open(rest.front())) {
      throw malformed("expected '(' or '['");
    }
    std::size_t close = 1;
    while (close < rest.size() && !is_close(rest[close]) && !is_open(rest[close])) ++close;
    if (close >= rest.size() || !is_close(rest[close])) {
      throw malformed("unterminated tuple");
    }
    auto values = parse_numbers(rest.substr(1, close - 1));
    if (!values) {
      throw malformed("non-numeric entry");
    }
    if (values->size() != d) {
      throw malformed("arity " + std::to_string(values->size()) + ", expected " + std::to_string(d));
    }
    out.emplace_back(std::move(*values));
    ++position;
    rest = trim(rest.substr(close + 1));
    if (!rest.empty()) {
      if (rest.front() != ',') {
        throw malformed("expected ',' between tuples");
      }
      rest.remove_prefix(1);
    }
  }
  return out;
}

std::size_t self_consistent_index(std::span<const Solution> candidates,
                                  const std::function<double(const Solution&)>& loss, double tol) {
  if (candidates.empty()) {
    throw Error(ErrorCode::InvalidArgument, "self_consistent_choice: no candidates");
  }
  const auto close = [tol](const Solution& a, const Solution& b) {
    if (a.dim() != b.dim()) return false;
    for (std::size_t i = 0; i < a.dim(); ++i) {
      if (std::abs(a[i] - b[i]) > tol) return false;
    }
    return true;
  };
  struct Cluster {
    std::size_t representative;
    std::size_t size;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto it = std::find_if(clusters.begin(), clusters.end(),
                           [&](const Cluster& c) { return close(candidates[c.representative], candidates[i]); });
    if (it == clusters.end()) {
      clusters.push_back({i, 1});
    } else {
      ++it->size;
    }
  }
  const Cluster* best = &clusters.front();
  double best_loss = loss(candidates[best->representative]);
  for (const auto& c : clusters) {
    if (&c == best) continue;
    const double l = loss(candidates[c.representative]);
    if (c.size > best->size || (c.size == best->size && l < best_loss)) {
      best = &c;
      best_loss = l;
    }
  }
  return best->representative;
}

Solution self_consistent_choice(std::span<const Solution> candidates,
                                const std::function<double(const Solution&)>& loss, double tol) {
  return candidates[self_consistent_index(candidates, loss, tol)];
}

}  // namespace llmopt
