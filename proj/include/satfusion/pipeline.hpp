#pragma once

#include <iosfwd>
#include <set>
#include <vector>

#include "satfusion/evaluation.hpp"
#include "satfusion/run_config.hpp"
#include "satfusion/training.hpp"

namespace satfusion {

/// Corpus artifacts loaded back from the work directory.
struct Corpus {
  std::vector<Session> sessions;
  std::vector<SessionTruth> truths;  // aligned with sessions
  std::set<std::string> whitelist;
  MetaSchema schema;
  DatasetSplit split;
};

Corpus load_corpus(const RunConfig& config);

struct LabeledSets {
  std::vector<Session> train;
  std::vector<Session> validation;
};

/// FP: whitelisted sessions answered YES or NO, labeled by the answer.
/// HP: a seeded annotation_fraction sample of all traffic, labeled by the
/// annotator. Both draw from the train and validation splits only.
LabeledSets training_sets(const Corpus& corpus, ModelKind kind, const RunConfig& config);

/// Algorithm 1 pools per intent over the given sessions. F holds YES/NO
/// sessions labeled by the answer; H slots hold annotator labels.
SegmentPools build_pools(const Corpus& corpus, std::span<const std::size_t> indices,
                         const std::map<std::string, SegmentRates>& rates, double gt_fraction);

struct RateResult {
  double rate = 0.0;
  std::size_t marked = 0;
  std::vector<ApproachResult> approaches;
};

struct EvaluationRun {
  double tau = 0.0;
  std::vector<std::pair<double, double>> tau_f1;  // dev F1 per grid point
  std::vector<RateResult> rates;
  GroundTruthSet ground_truth;
};

/// Fig. 3-style plain-text table: one block per rate, micro then macro
/// columns, cross-domain std dev of F1 last.
std::string format_report_table(const EvaluationRun& run, const std::string& config_hash);
Json report_json(const EvaluationRun& run, const RunConfig& config);

struct FeedbackAnalysis {
  Agreement agreement;
  std::size_t pairs = 0;
  std::size_t elicited = 0;
  std::map<std::string, std::size_t> categories;  // YES, NO, SILENCE, OTHER
};

/// Feedback vs. annotation over YES/NO sessions; throws DataError when no
/// session was elicited.
FeedbackAnalysis analyze_feedback(const Corpus& corpus);
Json to_json(const FeedbackAnalysis& analysis, const RunConfig& config);

// Commands. Each writes its artifacts with write-then-rename and returns a
// short JSON summary; progress goes to log.
Json cmd_generate(const RunConfig& config, std::ostream& log);
Json cmd_train(ModelKind kind, const RunConfig& config, std::ostream& log);
Json cmd_compose_gt(const RunConfig& config, std::ostream& log);
Json cmd_evaluate(const RunConfig& config, std::ostream& log);
Json cmd_analyze_feedback(const RunConfig& config, std::ostream& log);
/// generate, train FP and HP, compose-gt, evaluate, analyze-feedback.
Json cmd_sweep(const RunConfig& config, std::ostream& log);

}  // namespace satfusion
