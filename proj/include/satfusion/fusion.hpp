#pragma once

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "satfusion/dialog.hpp"
#include "satfusion/dialog_io.hpp"
#include "satfusion/predictor.hpp"

namespace satfusion {

enum class VerdictSource { kExplicit, kFeedbackModel, kFallbackModel };

std::string_view to_string(VerdictSource source);

/// Fused satisfaction decision and where it came from.
struct Verdict {
  bool dissatisfied = false;
  double score = 0.0;  // probability of dissatisfaction behind the decision
  VerdictSource source = VerdictSource::kFallbackModel;
  std::optional<double> threshold_used;  // tau, for model-sourced verdicts
  std::string session_id;
};

struct FusionConfig {
  double tau = 0.8;
  double decision_cutoff = 0.5;
  std::set<std::string> fp_whitelist;
  /// The feedback model is only consulted for experiences that could have
  /// been elicited: whitelisted intent and no barge-in, termination or
  /// unhandled flag on the target turn.
  bool fp_requires_eligible_turn = true;
};

/// Throws ConfigError unless 0.5 <= tau <= 1.
void validate(const FusionConfig& config);

/// max(p, 1 - p).
constexpr double confidence(double p) { return p >= 0.5 ? p : 1.0 - p; }

/// Whether stage two may use the feedback model for this session.
bool fp_eligible(const Session& session, const FusionConfig& config);

/// The three-stage waterfall over already-known inputs. Model scores are
/// pulled lazily, so a stage that is not reached is never evaluated.
Verdict waterfall(FeedbackCategory feedback, bool fp_is_eligible, const FusionConfig& config,
                  const std::function<double()>& fp_score,
                  const std::function<double()>& hp_score);

/// 1) interpretable explicit feedback, 2) a confident feedback-model
/// prediction on an eligible experience, 3) the fallback model.
Verdict assess(const Session& session, const SatisfactionModel& fp, const SatisfactionModel& hp,
               const FusionConfig& config);

/// Cached model scores for one session.
struct ScoredSession {
  FeedbackCategory feedback = FeedbackCategory::kNoneElicited;
  bool fp_eligible = false;
  std::optional<double> fp_score;  // present when fp_eligible
  double hp_score = 0.0;
  int label = 0;
};

ScoredSession score_session(const Session& session, const SatisfactionModel& fp,
                            const SatisfactionModel& hp, const FusionConfig& config);

Verdict assess_scored(const ScoredSession& scored, const FusionConfig& config);

/// Dissatisfaction-class F1 of the waterfall at a given tau.
double waterfall_f1(std::span<const ScoredSession> dev, const FusionConfig& config, double tau);

/// Default tau grid 0.50, 0.55, ..., 1.00.
std::vector<double> default_tau_grid();

/// The tau maximizing waterfall F1 on dev; ties go to the larger tau.
/// Throws ConfigError on an empty grid, DataError on an empty or unlabeled
/// dev set.
double tune_threshold(std::span<const Session> dev, const SatisfactionModel& fp,
                      const SatisfactionModel& hp, std::span<const double> candidate_taus,
                      const FusionConfig& config);
double tune_threshold_scored(std::span<const ScoredSession> dev,
                             std::span<const double> candidate_taus, const FusionConfig& config);

Json to_json(const Verdict& verdict);
/// JSON Lines with session_id, dissatisfied, score, source, threshold_used.
void save_verdicts(const std::filesystem::path& path, const std::vector<Verdict>& verdicts);

}  // namespace satfusion
