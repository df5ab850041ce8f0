#include "llmopt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "llmopt/error.hpp"

namespace llmopt {

namespace {

std::vector<const TrialOutcome*> used_outcomes(std::span<const TrialOutcome> outcomes) {
  std::vector<const TrialOutcome*> used;
  for (const auto& o : outcomes) {
    if (!outcomes.empty() && o.sample_id != outcomes.front().sample_id) {
      throw Error(ErrorCode::InvalidArgument, "metric inputs mix samples '" + outcomes.front().sample_id +
                                                  "' and '" + o.sample_id + "'");
    }
    if (!o.excluded) {
      used.push_back(&o);
    }
  }
  if (used.empty()) {
    throw Error(ErrorCode::UndefinedMetric, "no non-excluded trial outcomes");
  }
  return used;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

MetricStats stats_of(const std::vector<double>& values, std::size_t skipped) {
  MetricStats s;
  s.n_samples = values.size();
  s.n_skipped = skipped;
  if (values.empty()) {
    return s;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  s.mean = mean;
  s.std = std::sqrt(sq / static_cast<double>(values.size()));
  return s;
}

}  // namespace

double goal_metric(std::span<const TrialOutcome> outcomes) {
  const auto used = used_outcomes(outcomes);
  double sum = 0.0;
  for (const auto* o : used) {
    if (!(o->init_loss > 0.0)) {
      throw Error(ErrorCode::UndefinedMetric, "goal metric undefined: sample '" + o->sample_id +
                                                  "' starts at the optimum (initial loss 0)");
    }
    sum += (o->init_loss - o->final_loss) / o->init_loss;
  }
  return sum / static_cast<double>(used.size());
}

std::optional<double> policy_metric(std::span<const TrialOutcome> outcomes, double truth, double epsilon) {
  const auto used = used_outcomes(outcomes);
  if (truth < epsilon) {
    return std::nullopt;
  }
  double sum = 0.0;
  for (const auto* o : used) {
    sum += (o->final_loss - truth) / truth;
  }
  return sum / static_cast<double>(used.size());
}

double uncertainty_metric(std::span<const TrialOutcome> outcomes) {
  const auto used = used_outcomes(outcomes);
  const auto n = static_cast<double>(used.size());
  double mean = 0.0;
  for (const auto* o : used) mean += o->final_loss;
  mean /= n;
  double sq = 0.0;
  for (const auto* o : used) sq += (o->final_loss - mean) * (o->final_loss - mean);
  return sq / n;
}

std::vector<TrialOutcome> exclude_outliers(std::vector<TrialOutcome> outcomes, const ExclusionRule& rule,
                                           std::vector<std::string>* warnings) {
  std::map<std::string, std::vector<std::size_t>> by_sample;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    by_sample[outcomes[i].sample_id].push_back(i);
  }
  for (const auto& [sample, indices] : by_sample) {
    std::vector<std::pair<std::size_t, std::string>> flagged;
    for (std::size_t i : indices) {
      const auto& o = outcomes[i];
      if (o.excluded) {
        flagged.emplace_back(i, o.reason);
      } else if (rule.exclude_failed && o.failed) {
        flagged.emplace_back(i, o.reason.empty() ? "trial failed" : o.reason);
      } else if (o.final_loss > rule.divergence_factor * o.init_loss) {
        flagged.emplace_back(i, "diverged: final loss " + format_number(o.final_loss) + " > " +
                                    format_number(rule.divergence_factor) + " x initial loss " +
                                    format_number(o.init_loss));
      } else if (rule.extra) {
        if (auto why = rule.extra(o)) {
          flagged.emplace_back(i, *why);
        }
      }
    }
    std::optional<std::size_t> keep;
    if (!flagged.empty() && flagged.size() == indices.size()) {
      keep = flagged.front().first;
      for (const auto& [i, why] : flagged) {
        if (outcomes[i].final_loss > outcomes[*keep].final_loss) {
          keep = i;
        }
      }
      if (warnings != nullptr) {
        warnings->push_back("sample '" + sample + "': every trial met the exclusion rule; retaining trial " +
                            std::to_string(outcomes[*keep].trial_index) + " (worst offender)");
      }
    }
    for (const auto& [i, why] : flagged) {
      if (keep && *keep == i) {
        outcomes[i].excluded = false;
        outcomes[i].reason = "retained despite exclusion rule: " + why;
        continue;
      }
      outcomes[i].excluded = true;
      outcomes[i].reason = why;
    }
  }
  return outcomes;
}

SampleMetrics compute_sample_metrics(TaskKind task, std::size_t dimension, std::span<const TrialOutcome> outcomes,
                                     std::optional<double> truth) {
  std::vector<TrialOutcome> sorted(outcomes.begin(), outcomes.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const TrialOutcome& a, const TrialOutcome& b) { return a.trial_index < b.trial_index; });

  SampleMetrics m;
  m.task = task;
  m.dimension = dimension;
  m.sample_id = sorted.empty() ? std::string{} : sorted.front().sample_id;
  for (const auto& o : sorted) {
    (o.excluded ? m.n_excluded : m.n_used) += 1;
  }
  if (task == TaskKind::GridSearch) {
    m.notes.emplace_back("goal omitted: grid search is non-iterative");
  } else {
    try {
      m.goal = goal_metric(sorted);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UndefinedMetric) throw;
      m.notes.emplace_back(e.what());
    }
  }
  if (truth) {
    m.policy = policy_metric(sorted, *truth);
    if (!m.policy) {
      m.notes.emplace_back("policy absent: degenerate ground truth");
    }
  } else {
    m.notes.emplace_back("policy absent: no ground truth");
  }
  m.uncertainty = uncertainty_metric(sorted);
  return m;
}

MetricReport aggregate(std::span<const SampleMetrics> samples) {
  using Key = std::tuple<int, std::size_t>;
  std::map<Key, std::vector<const SampleMetrics*>> groups;
  for (const auto& s : samples) {
    groups[{static_cast<int>(s.task), s.dimension}].push_back(&s);
  }
  MetricReport report;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const SampleMetrics* a, const SampleMetrics* b) { return a->sample_id < b->sample_id; });
    std::vector<double> g, p, u;
    GroupReport row;
    row.task = static_cast<TaskKind>(std::get<0>(key));
    row.dimension = std::get<1>(key);
    row.n_samples = members.size();
    for (const auto* s : members) {
      if (s->goal) g.push_back(*s->goal);
      if (s->policy) p.push_back(*s->policy);
      u.push_back(s->uncertainty);
      row.n_excluded += static_cast<std::size_t>(s->n_excluded);
    }
    row.goal = stats_of(g, members.size() - g.size());
    row.policy = stats_of(p, members.size() - p.size());
    row.uncertainty = stats_of(u, 0);
    report.groups.push_back(row);
  }
  return report;
}

namespace {

struct NamedStats {
  const char* name;
  const MetricStats* stats;
};

std::vector<NamedStats> metric_rows(const GroupReport& g) {
  return {{"G", &g.goal}, {"P", &g.policy}, {"U", &g.uncertainty}};
}

}  // namespace

std::string report_to_csv(const MetricReport& report) {
  std::string out = "task,dimension,metric,mean,std,n_samples,n_excluded\n";
  for (const auto& g : report.groups) {
    for (const auto& [name, s] : metric_rows(g)) {
      out += std::string(task_name(g.task)) + ',' + std::to_string(g.dimension) + ',' + name + ',';
      out += (s->mean ? format_number(*s->mean) : std::string{}) + ',';
      out += (s->std ? format_number(*s->std) : std::string{}) + ',';
      out += std::to_string(s->n_samples) + ',' + std::to_string(g.n_excluded) + '\n';
    }
  }
  return out;
}

nlohmann::json report_to_json(const MetricReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& g : report.groups) {
    for (const auto& [name, s] : metric_rows(g)) {
      nlohmann::json row;
      row["task"] = task_name(g.task);
      row["dimension"] = g.dimension;
      row["metric"] = name;
      row["mean"] = s->mean ? nlohmann::json(*s->mean) : nlohmann::json(nullptr);
      row["std"] = s->std ? nlohmann::json(*s->std) : nlohmann::json(nullptr);
      row["n_samples"] = s->n_samples;
      row["n_skipped"] = s->n_skipped;
      row["n_excluded"] = g.n_excluded;
      rows.push_back(std::move(row));
    }
  }
  return nlohmann::json{{"rows", std::move(rows)}};
}

}  // namespace llmopt
