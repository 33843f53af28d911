#include "satfusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "satfusion/errors.hpp"

namespace satfusion {

void ConfusionCounts::add(bool predicted_positive, bool actually_positive) {
  if (predicted_positive) {
    ++(actually_positive ? tp : fp);
  } else {
    ++(actually_positive ? fn : tn);
  }
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

PrecisionRecall prf(const ConfusionCounts& c) {
  PrecisionRecall out;
  if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (out.precision > 0.0 && out.recall > 0.0) {
    out.f1 = 2.0 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

double pr_auc(std::span<const ScoredLabel> points) {
  std::size_t positives = 0;
  for (const auto& p : points) positives += p.label == 1 ? 1 : 0;
  if (positives == 0) throw DataError("pr_auc: no positive labels, curve undefined");

  std::vector<ScoredLabel> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

  double area = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double threshold = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == threshold) {
      tp += sorted[i].label == 1 ? 1 : 0;
      ++seen;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

Agreement agreement_and_kappa(std::span<const std::pair<int, int>> pairs) {
  if (pairs.empty()) throw DataError("agreement_and_kappa: no rating pairs");
  double both_pos = 0, a_pos = 0, b_pos = 0, agree = 0;
  for (const auto& [a, b] : pairs) {
    if ((a != 0 && a != 1) || (b != 0 && b != 1)) {
      throw DataError("agreement_and_kappa: labels must be binary");
    }
    agree += a == b ? 1 : 0;
    a_pos += a;
    b_pos += b;
    both_pos += a * b;
  }
  const double n = static_cast<double>(pairs.size());
  Agreement out;
  out.agreement_rate = agree / n;
  const double pa = a_pos / n;
  const double pb = b_pos / n;
  const double chance = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (chance < 1.0) out.kappa = (out.agreement_rate - chance) / (1.0 - chance);
  return out;
}

MetricSet micro_metrics(std::span<const ExampleOutcome> examples) {
  ConfusionCounts counts;
  std::vector<ScoredLabel> scored;
  scored.reserve(examples.size());
  bool any_positive = false;
  for (const auto& e : examples) {
    counts.add(e.predicted, e.label == 1);
    scored.push_back({e.score, e.label});
    any_positive = any_positive || e.label == 1;
  }
  const auto p = prf(counts);
  MetricSet m{p.precision, p.recall, p.f1, std::nullopt};
  if (any_positive) m.pr_auc = pr_auc(scored);
  return m;
}

std::vector<std::string> select_domains(std::span<const ExampleOutcome> examples,
                                        std::size_t top_k, double coverage_target) {
  std::map<std::string, std::size_t> counts;
  for (const auto& e : examples) ++counts[e.domain];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> chosen;
  std::size_t covered = 0;
  const double total = static_cast<double>(examples.size());
  for (const auto& [domain, count] : ranked) {
    if (chosen.size() >= top_k) break;
    if (total > 0 && static_cast<double>(covered) / total >= coverage_target) break;
    chosen.push_back(domain);
    covered += count;
  }
  return chosen;
}

std::optional<double> population_std(std::span<const double> values) {
  if (values.size() < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size()));
}

MetricsReport macro_report(std::span<const ExampleOutcome> examples, std::size_t top_k,
                           double coverage_target) {
  MetricsReport report;
  report.examples = examples.size();
  report.micro = micro_metrics(examples);
  report.domains_used = select_domains(examples, top_k, coverage_target);

  std::map<std::string, std::vector<ExampleOutcome>> by_domain;
  for (const auto& e : examples) by_domain[e.domain].push_back(e);

  std::vector<double> precision, recall, f1, auc;
  std::size_t covered = 0;
  for (const auto& domain : report.domains_used) {
    const auto& rows = by_domain[domain];
    covered += rows.size();
    DomainMetrics dm{domain, rows.size(), micro_metrics(rows)};
    precision.push_back(dm.metrics.precision);
    recall.push_back(dm.metrics.recall);
    f1.push_back(dm.metrics.f1);
    if (dm.metrics.pr_auc) auc.push_back(*dm.metrics.pr_auc);
    report.per_domain.push_back(std::move(dm));
  }
  if (!examples.empty()) {
    report.coverage = static_cast<double>(covered) / static_cast<double>(examples.size());
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  report.macro.precision = mean(precision);
  report.macro.recall = mean(recall);
  report.macro.f1 = mean(f1);
  if (!auc.empty()) report.macro.pr_auc = mean(auc);
  report.macro_std.precision = population_std(precision);
  report.macro_std.recall = population_std(recall);
  report.macro_std.f1 = population_std(f1);
  report.macro_std.pr_auc = population_std(auc);
  return report;
}

}  // namespace satfusion
