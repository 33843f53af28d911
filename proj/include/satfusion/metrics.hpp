#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace satfusion {

/// Confusion counts with dissatisfaction as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  void add(bool predicted_positive, bool actually_positive);
  std::size_t total() const { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o);
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Zero denominators give 0; F1 is 0 whenever precision or recall is 0.
PrecisionRecall prf(const ConfusionCounts& counts);

struct ScoredLabel {
  double score = 0.0;
  int label = 0;  // 1 = dissatisfied
};

/// Average-precision area under the precision-recall curve. Equal scores are
/// one threshold group. Throws DataError when no label is positive.
double pr_auc(std::span<const ScoredLabel> points);

struct Agreement {
  double agreement_rate = 0.0;
  std::optional<double> kappa;  // absent when chance agreement is 1
};

/// Observed agreement and Cohen's kappa between two binary raters.
/// Throws DataError on empty input or non-binary labels.
Agreement agreement_and_kappa(std::span<const std::pair<int, int>> pairs);

/// One evaluated example for aggregation.
struct ExampleOutcome {
  std::string domain;
  double score = 0.0;     // probability of dissatisfaction behind the decision
  int label = 0;          // ground truth
  bool predicted = false; // final dissatisfied decision
};

struct MetricSet {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> pr_auc;  // absent without positive labels
};

struct MetricSpread {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> pr_auc;
};

struct DomainMetrics {
  std::string domain;
  std::size_t count = 0;
  MetricSet metrics;
};

struct MetricsReport {
  MetricSet micro;
  MetricSet macro;
  MetricSpread macro_std;  // population std dev across selected domains
  std::vector<DomainMetrics> per_domain;
  std::vector<std::string> domains_used;
  double coverage = 0.0;
  std::size_t examples = 0;
};

/// Pooled metrics over all examples.
MetricSet micro_metrics(std::span<const ExampleOutcome> examples);

/// Domains in descending example count (ties by name), taken until top_k are
/// chosen or their cumulative share reaches coverage_target.
std::vector<std::string> select_domains(std::span<const ExampleOutcome> examples,
                                        std::size_t top_k, double coverage_target);

/// Micro metrics over everything plus two-stage macro averages over the
/// selected domains. Std devs need at least two domains.
MetricsReport macro_report(std::span<const ExampleOutcome> examples, std::size_t top_k = 20,
                           double coverage_target = 0.98);

/// Population standard deviation; absent for fewer than two values.
std::optional<double> population_std(std::span<const double> values);

}  // namespace satfusion
