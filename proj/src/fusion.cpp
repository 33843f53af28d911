#include "satfusion/fusion.hpp"

#include <sstream>

#include "satfusion/errors.hpp"
#include "satfusion/metrics.hpp"

namespace satfusion {

std::string_view to_string(VerdictSource source) {
  switch (source) {
    case VerdictSource::kExplicit:
      return "EXPLICIT";
    case VerdictSource::kFeedbackModel:
      return "FP";
    case VerdictSource::kFallbackModel:
      return "HP";
  }
  return "HP";
}

void validate(const FusionConfig& config) {
  if (!(config.tau >= 0.5 && config.tau <= 1.0)) {
    throw ConfigError("fusion tau must lie in [0.5, 1], got " + std::to_string(config.tau));
  }
}

bool fp_eligible(const Session& session, const FusionConfig& config) {
  if (!segment_of(session, config.fp_whitelist).eligible_for_feedback) return false;
  return !config.fp_requires_eligible_turn || !session.target().flags.ineligible();
}

Verdict waterfall(FeedbackCategory feedback, bool fp_is_eligible, const FusionConfig& config,
                  const std::function<double()>& fp_score,
                  const std::function<double()>& hp_score) {
  if (auto label = feedback_label(feedback)) {
    return Verdict{*label == 1, static_cast<double>(*label), VerdictSource::kExplicit,
                   std::nullopt, {}};
  }
  std::optional<double> consulted;
  if (fp_is_eligible) {
    const double p = fp_score();
    consulted = config.tau;
    if (confidence(p) >= config.tau) {
      return Verdict{p >= config.decision_cutoff, p, VerdictSource::kFeedbackModel, config.tau, {}};
    }
  }
  const double p = hp_score();
  return Verdict{p >= config.decision_cutoff, p, VerdictSource::kFallbackModel, consulted, {}};
}

Verdict assess(const Session& session, const SatisfactionModel& fp, const SatisfactionModel& hp,
               const FusionConfig& config) {
  validate(config);
  Verdict v = waterfall(
      session.feedback, fp_eligible(session, config), config,
      [&] { return fp.probability(session); }, [&] { return hp.probability(session); });
  v.session_id = session.session_id;
  return v;
}

ScoredSession score_session(const Session& session, const SatisfactionModel& fp,
                            const SatisfactionModel& hp, const FusionConfig& config) {
  ScoredSession s;
  s.feedback = session.feedback;
  s.fp_eligible = fp_eligible(session, config);
  if (s.fp_eligible) s.fp_score = fp.probability(session);
  s.hp_score = hp.probability(session);
  s.label = session.label.value_or(0);
  return s;
}

Verdict assess_scored(const ScoredSession& scored, const FusionConfig& config) {
  return waterfall(
      scored.feedback, scored.fp_eligible, config, [&] { return scored.fp_score.value(); },
      [&] { return scored.hp_score; });
}

double waterfall_f1(std::span<const ScoredSession> dev, const FusionConfig& config, double tau) {
  FusionConfig at = config;
  at.tau = tau;
  ConfusionCounts counts;
  for (const auto& s : dev) counts.add(assess_scored(s, at).dissatisfied, s.label == 1);
  return prf(counts).f1;
}

std::vector<double> default_tau_grid() {
  std::vector<double> grid;
  for (int i = 10; i <= 20; ++i) grid.push_back(i / 20.0);
  return grid;
}

double tune_threshold_scored(std::span<const ScoredSession> dev,
                             std::span<const double> candidate_taus, const FusionConfig& config) {
  if (candidate_taus.empty()) throw ConfigError("tune_threshold: empty tau grid");
  if (dev.empty()) throw DataError("tune_threshold: empty development set");
  double best_tau = 0.0;
  double best_f1 = -1.0;
  for (double tau : candidate_taus) {
    if (!(tau >= 0.5 && tau <= 1.0)) {
      throw ConfigError("tune_threshold: tau " + std::to_string(tau) + " outside [0.5, 1]");
    }
    const double f1 = waterfall_f1(dev, config, tau);
    if (f1 > best_f1 || (f1 == best_f1 && tau > best_tau)) {
      best_f1 = f1;
      best_tau = tau;
    }
  }
  return best_tau;
}

double tune_threshold(std::span<const Session> dev, const SatisfactionModel& fp,
                      const SatisfactionModel& hp, std::span<const double> candidate_taus,
                      const FusionConfig& config) {
  if (candidate_taus.empty()) throw ConfigError("tune_threshold: empty tau grid");
  if (dev.empty()) throw DataError("tune_threshold: empty development set");
  std::vector<ScoredSession> scored;
  scored.reserve(dev.size());
  for (const auto& s : dev) {
    if (!s.label) throw DataError("tune_threshold: dev session '" + s.session_id + "' unlabeled");
    scored.push_back(score_session(s, fp, hp, config));
  }
  return tune_threshold_scored(scored, candidate_taus, config);
}

Json to_json(const Verdict& v) {
  Json j{{"session_id", v.session_id},
         {"dissatisfied", v.dissatisfied},
         {"score", v.score},
         {"source", std::string(to_string(v.source))},
         {"threshold_used", nullptr}};
  if (v.threshold_used) j["threshold_used"] = *v.threshold_used;
  return j;
}

void save_verdicts(const std::filesystem::path& path, const std::vector<Verdict>& verdicts) {
  std::ostringstream out;
  for (const auto& v : verdicts) out << to_json(v).dump() << '\n';
  write_file_atomic(path, out.str());
}

}  // namespace satfusion
