#include "satfusion/evaluation.hpp"

#include <unordered_set>

#include "satfusion/errors.hpp"

namespace satfusion {

std::string_view to_string(Approach a) {
  switch (a) {
    case Approach::kHp:
      return "HP";
    case Approach::kEfbHp:
      return "EFB+HP";
    case Approach::kEfbFpHp:
      return "EFB+FP+HP";
  }
  return "HP";
}

Approach parse_approach(std::string_view name) {
  for (Approach a : all_approaches()) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown approach '" + std::string(name) + "'");
}

const std::vector<Approach>& all_approaches() {
  static const std::vector<Approach> all{Approach::kHp, Approach::kEfbHp, Approach::kEfbFpHp};
  return all;
}

PredictionCache score_ground_truth(const GroundTruthSet& gt, std::span<const Session> sessions,
                                   const SatisfactionModel& fp, const SatisfactionModel& hp,
                                   const FusionConfig& config) {
  std::unordered_set<std::string> wanted;
  for (const auto& ex : gt.examples) wanted.insert(ex.session_id);
  PredictionCache cache;
  for (const auto& s : sessions) {
    if (wanted.count(s.session_id) == 0 || cache.count(s.session_id)) continue;
    ScoredSession scored = score_session(s, fp, hp, config);
    scored.label = 0;
    cache.emplace(s.session_id, scored);
  }
  for (const auto& id : wanted) {
    if (cache.count(id) == 0) {
      throw DataError("ground truth session '" + id + "' is missing from the corpus");
    }
  }
  return cache;
}

Verdict verdict_for(Approach approach, const GroundTruthExample& example,
                    const ScoredSession& scored, const FusionConfig& config) {
  // A marked example's feedback equals its label by construction.
  const FeedbackCategory presented =
      example.given_by_user ? (example.label == 1 ? FeedbackCategory::kNo : FeedbackCategory::kYes)
                            : FeedbackCategory::kNoneElicited;
  Verdict v;
  switch (approach) {
    case Approach::kHp:
      v = waterfall(FeedbackCategory::kNoneElicited, false, config, {},
                    [&] { return scored.hp_score; });
      break;
    case Approach::kEfbHp:
      v = waterfall(presented, false, config, {}, [&] { return scored.hp_score; });
      break;
    case Approach::kEfbFpHp:
      v = waterfall(
          presented, scored.fp_eligible, config, [&] { return scored.fp_score.value(); },
          [&] { return scored.hp_score; });
      break;
  }
  v.session_id = example.session_id;
  return v;
}

std::vector<ApproachResult> evaluate_approaches(const GroundTruthSet& gt,
                                                const PredictionCache& cache,
                                                const FusionConfig& config,
                                                std::span<const Approach> approaches,
                                                std::size_t top_k, double coverage_target) {
  if (!gt.marked_rate) {
    throw UsageError(
        "ground truth has not been marked; call mark_given_feedback with the feedback rate first");
  }
  validate(config);
  std::vector<ApproachResult> results;
  for (Approach a : approaches) {
    ApproachResult result;
    result.approach = a;
    std::vector<ExampleOutcome> outcomes;
    outcomes.reserve(gt.examples.size());
    for (const auto& ex : gt.examples) {
      auto it = cache.find(ex.session_id);
      if (it == cache.end()) {
        throw DataError("no cached prediction for session '" + ex.session_id + "'");
      }
      Verdict v = verdict_for(a, ex, it->second, config);
      outcomes.push_back({ex.domain, v.score, ex.label, v.dissatisfied});
      result.verdicts.push_back(std::move(v));
    }
    result.report = macro_report(outcomes, top_k, coverage_target);
    results.push_back(std::move(result));
  }
  return results;
}

std::vector<ScoredSession> tuning_set(const GroundTruthSet& dev, const PredictionCache& cache) {
  std::vector<ScoredSession> out;
  out.reserve(dev.examples.size());
  for (const auto& ex : dev.examples) {
    auto it = cache.find(ex.session_id);
    if (it == cache.end()) throw DataError("no cached prediction for '" + ex.session_id + "'");
    ScoredSession s = it->second;
    s.feedback = FeedbackCategory::kNoneElicited;
    s.label = ex.label;
    out.push_back(s);
  }
  return out;
}

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const MetricSet& m) {
  return Json{{"precision", m.precision},
              {"recall", m.recall},
              {"f1", m.f1},
              {"pr_auc", optional_json(m.pr_auc)}};
}

Json to_json(const MetricsReport& r) {
  Json per_domain = Json::array();
  for (const auto& d : r.per_domain) {
    per_domain.push_back({{"domain", d.domain}, {"count", d.count}, {"metrics", to_json(d.metrics)}});
  }
  return Json{{"micro", to_json(r.micro)},
              {"macro", to_json(r.macro)},
              {"macro_std",
               {{"precision", optional_json(r.macro_std.precision)},
                {"recall", optional_json(r.macro_std.recall)},
                {"f1", optional_json(r.macro_std.f1)},
                {"pr_auc", optional_json(r.macro_std.pr_auc)}}},
              {"domains_used", r.domains_used},
              {"coverage", r.coverage},
              {"examples", r.examples},
              {"per_domain", per_domain}};
}

}  // namespace satfusion
