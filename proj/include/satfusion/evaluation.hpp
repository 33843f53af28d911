#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "satfusion/fusion.hpp"
#include "satfusion/ground_truth.hpp"
#include "satfusion/metrics.hpp"

namespace satfusion {

enum class Approach { kHp, kEfbHp, kEfbFpHp };

std::string_view to_string(Approach a);
Approach parse_approach(std::string_view name);
const std::vector<Approach>& all_approaches();

/// Model scores per session id, computed once and reused across rates and
/// approaches.
using PredictionCache = std::map<std::string, ScoredSession>;

/// Scores every session whose id is in the ground truth. Labels in the
/// cache are left at zero; ground-truth labels are applied at evaluation.
PredictionCache score_ground_truth(const GroundTruthSet& gt, std::span<const Session> sessions,
                                   const SatisfactionModel& fp, const SatisfactionModel& hp,
                                   const FusionConfig& config);

/// Verdict of one approach for one ground-truth example. Marked examples
/// present their explicit feedback; all others present none.
Verdict verdict_for(Approach approach, const GroundTruthExample& example,
                    const ScoredSession& scored, const FusionConfig& config);

struct ApproachResult {
  Approach approach = Approach::kHp;
  MetricsReport report;
  std::vector<Verdict> verdicts;
};

/// HP everywhere; explicit feedback on marked examples and HP elsewhere; or
/// the full waterfall. Throws UsageError on an unmarked ground truth and
/// DataError when an example has no cached score.
std::vector<ApproachResult> evaluate_approaches(const GroundTruthSet& gt,
                                                const PredictionCache& cache,
                                                const FusionConfig& config,
                                                std::span<const Approach> approaches,
                                                std::size_t top_k = 20,
                                                double coverage_target = 0.98);

/// Dev sessions as the tuner sees them: ground-truth labels, no feedback
/// given.
std::vector<ScoredSession> tuning_set(const GroundTruthSet& dev, const PredictionCache& cache);

Json to_json(const MetricSet& m);
Json to_json(const MetricsReport& r);

}  // namespace satfusion
