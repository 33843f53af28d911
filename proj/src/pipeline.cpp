#include "satfusion/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "satfusion/errors.hpp"
#include "satfusion/random.hpp"

namespace satfusion {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require(const std::filesystem::path& path, const std::string& what, const std::string& cmd) {
  if (!std::filesystem::exists(path)) {
    throw IoError("missing " + what + " at " + path.string() + " (run '" + cmd + "' first)");
  }
}

std::string percent(double rate) {
  std::ostringstream out;
  out << std::setprecision(6) << rate * 100.0 << "%";
  return out.str();
}

std::string rate_tag(double rate) {
  std::ostringstream out;
  out << std::setprecision(6) << rate;
  return out.str();
}

}  // namespace

Corpus load_corpus(const RunConfig& config) {
  const auto corpus_path = config.resolve(config.paths.corpus);
  const auto truth_path = config.resolve(config.paths.annotations);
  const auto manifest_path = config.resolve(config.paths.manifest);
  require(corpus_path, "corpus", "generate");
  require(truth_path, "annotations", "generate");
  require(manifest_path, "corpus manifest", "generate");

  Corpus c;
  c.sessions = load_sessions(corpus_path);
  c.truths = load_truths(truth_path);
  if (c.truths.size() != c.sessions.size()) {
    throw DataError("annotation file has " + std::to_string(c.truths.size()) +
                    " records for " + std::to_string(c.sessions.size()) + " sessions");
  }
  for (std::size_t i = 0; i < c.sessions.size(); ++i) {
    if (c.truths[i].session_id != c.sessions[i].session_id) {
      throw DataError("annotation record " + std::to_string(i) + " is for '" +
                      c.truths[i].session_id + "', expected '" + c.sessions[i].session_id + "'");
    }
  }
  try {
    const Json manifest = Json::parse(read_file(manifest_path));
    c.whitelist = manifest.at("whitelist").get<std::set<std::string>>();
  } catch (const Json::exception& e) {
    throw DataError("bad manifest " + manifest_path.string() + ": " + e.what());
  }
  c.split = split_80_10_10(c.sessions.size(), derive_seed(config.seed, "corpus-split"));
  return c;
}

namespace {

std::vector<std::size_t> sample_sorted(std::span<const std::size_t> indices, double fraction,
                                       std::uint64_t seed) {
  Rng rng(seed);
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(indices.size())));
  std::vector<std::size_t> picked;
  for (std::size_t i : rng.sample_indices(indices.size(), k)) picked.push_back(indices[i]);
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<Session> labeled(const Corpus& corpus, std::span<const std::size_t> indices,
                             ModelKind kind) {
  std::vector<Session> out;
  for (std::size_t i : indices) {
    const Session& s = corpus.sessions[i];
    if (kind == ModelKind::kFeedback) {
      const auto label = feedback_label(s.feedback);
      if (!label || corpus.whitelist.count(s.target().intent) == 0) continue;
      Session copy = s;
      copy.label = *label;
      out.push_back(std::move(copy));
    } else {
      Session copy = s;
      copy.label = corpus.truths[i].annotation;
      out.push_back(std::move(copy));
    }
  }
  return out;
}

}  // namespace

LabeledSets training_sets(const Corpus& corpus, ModelKind kind, const RunConfig& config) {
  LabeledSets sets;
  if (kind == ModelKind::kFeedback) {
    sets.train = labeled(corpus, corpus.split.train, kind);
    sets.validation = labeled(corpus, corpus.split.validation, kind);
  } else {
    const auto train_idx = sample_sorted(corpus.split.train, config.annotation_fraction,
                                         derive_seed(config.seed, "annotate-train"));
    const auto val_idx = sample_sorted(corpus.split.validation, config.annotation_fraction,
                                       derive_seed(config.seed, "annotate-validation"));
    sets.train = labeled(corpus, train_idx, kind);
    sets.validation = labeled(corpus, val_idx, kind);
  }
  return sets;
}

SegmentPools build_pools(const Corpus& corpus, std::span<const std::size_t> indices,
                         const std::map<std::string, SegmentRates>& rates, double gt_fraction) {
  std::map<std::string, SegmentPool> by_segment;
  std::map<std::string, std::size_t> traffic;
  for (std::size_t i : indices) {
    const Session& s = corpus.sessions[i];
    const Segment seg = segment_of(s, corpus.whitelist);
    SegmentPool& pool = by_segment[seg.intent];
    pool.segment = seg.intent;
    ++traffic[seg.intent];
    const int annotation = corpus.truths[i].annotation;
    if (!seg.eligible_for_feedback) {
      pool.h_ineligible.push_back({s.session_id, annotation, seg.domain});
    } else if (auto label = feedback_label(s.feedback)) {
      pool.feedback.push_back({s.session_id, *label, seg.domain});
    } else if (s.target().flags.ineligible()) {
      pool.h_ineligible.push_back({s.session_id, annotation, seg.domain});
    } else {
      pool.h_eligible.push_back({s.session_id, annotation, seg.domain});
    }
  }
  SegmentPools pools;
  for (auto& [segment, pool] : by_segment) {
    const bool white = corpus.whitelist.count(segment) == 1;
    if (auto it = rates.find(segment); it != rates.end()) {
      pool.rate_ineligible = it->second.rate_ineligible.value_or(white ? 0.0 : 1.0);
      pool.rate_other = it->second.rate_other.value_or(0.0);
    } else {
      pool.rate_ineligible = white ? 0.0 : 1.0;
    }
    const auto cap = static_cast<std::size_t>(
        std::floor(gt_fraction * static_cast<double>(traffic[segment])));
    pool.target_count = feasible_target(pool, white, cap);
    pools.push_back(std::move(pool));
  }
  return pools;
}

std::string format_report_table(const EvaluationRun& run, const std::string& config_hash) {
  std::ostringstream out;
  out << "config " << config_hash << "  tau " << run.tau << "  ground truth "
      << run.ground_truth.examples.size() << " examples\n";
  const auto cell = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(4) << *v;
    } else {
      s << "-";
    }
    return s.str();
  };
  for (const auto& rate : run.rates) {
    out << "\nfeedback rate " << percent(rate.rate) << " (" << rate.marked << " marked)\n";
    out << std::left << std::setw(11) << "approach" << std::right;
    for (const char* block : {"micro", "macro"}) {
      for (const char* m : {"P", "R", "F1", "PR-AUC"}) {
        out << std::setw(13) << (std::string(block) + "." + m);
      }
    }
    out << std::setw(13) << "std(F1)" << "\n";
    for (const auto& a : rate.approaches) {
      const auto& r = a.report;
      out << std::left << std::setw(11) << to_string(a.approach) << std::right;
      for (const MetricSet* m : {&r.micro, &r.macro}) {
        out << std::setw(13) << cell(m->precision) << std::setw(13) << cell(m->recall)
            << std::setw(13) << cell(m->f1) << std::setw(13) << cell(m->pr_auc);
      }
      out << std::setw(13) << cell(r.macro_std.f1) << "\n";
    }
  }
  return out.str();
}

Json report_json(const EvaluationRun& run, const RunConfig& config) {
  Json rates = Json::array();
  for (const auto& rate : run.rates) {
    Json approaches = Json::object();
    for (const auto& a : rate.approaches) {
      approaches[std::string(to_string(a.approach))] = to_json(a.report);
    }
    rates.push_back({{"rate", rate.rate}, {"marked", rate.marked}, {"approaches", approaches}});
  }
  Json tau_f1 = Json::array();
  for (const auto& [tau, f1] : run.tau_f1) tau_f1.push_back({{"tau", tau}, {"f1", f1}});
  std::map<std::string, std::size_t> provenance;
  for (const auto& ex : run.ground_truth.examples) ++provenance[std::string(to_string(ex.provenance))];
  return Json{{"config_hash", config_hash(config)},
              {"config", to_json(config)},
              {"tau", run.tau},
              {"dev_tau_f1", tau_f1},
              {"ground_truth",
               {{"examples", run.ground_truth.examples.size()},
                {"provenance", provenance},
                {"shortfalls", run.ground_truth.shortfalls.size()}}},
              {"rates", rates}};
}

FeedbackAnalysis analyze_feedback(const Corpus& corpus) {
  FeedbackAnalysis a;
  std::vector<std::pair<int, int>> pairs;
  for (const char* name : {"YES", "NO", "SILENCE", "OTHER"}) a.categories[name] = 0;
  for (std::size_t i = 0; i < corpus.sessions.size(); ++i) {
    const Session& s = corpus.sessions[i];
    if (s.feedback == FeedbackCategory::kNoneElicited) continue;
    ++a.elicited;
    ++a.categories[std::string(to_string(s.feedback))];
    if (auto label = feedback_label(s.feedback)) pairs.emplace_back(*label, corpus.truths[i].annotation);
  }
  if (a.elicited == 0) throw DataError("corpus has no elicited sessions to analyze");
  if (pairs.empty()) throw DataError("corpus has no YES/NO feedback to compare with annotation");
  a.pairs = pairs.size();
  a.agreement = agreement_and_kappa(pairs);
  return a;
}

Json to_json(const FeedbackAnalysis& a, const RunConfig& config) {
  Json shares = Json::object();
  for (const auto& [name, count] : a.categories) {
    shares[name] = static_cast<double>(count) / static_cast<double>(a.elicited);
  }
  const auto& r = config.generator.rates;
  const double yes_no = 1.0 - r.silence_rate - r.other_feedback_rate;
  return Json{{"config_hash", config_hash(config)},
              {"pairs", a.pairs},
              {"elicited", a.elicited},
              {"agreement_rate", a.agreement.agreement_rate},
              {"kappa", a.agreement.kappa ? Json(*a.agreement.kappa) : Json(nullptr)},
              {"category_counts", a.categories},
              {"category_shares", shares},
              {"configured_shares",
               {{"YES_NO", yes_no}, {"SILENCE", r.silence_rate}, {"OTHER", r.other_feedback_rate}}}};
}

Json cmd_generate(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto start = Clock::now();
  std::filesystem::create_directories(config.workdir);
  GeneratedCorpus corpus = generate(config.generator);
  save_sessions(config.resolve(config.paths.corpus), corpus.sessions);
  save_truths(config.resolve(config.paths.annotations), corpus.truths);
  Json manifest = to_json(corpus.manifest);
  manifest["config_hash"] = config_hash(config);
  write_file_atomic(config.resolve(config.paths.manifest), manifest.dump(2) + "\n");
  log << "generated " << corpus.sessions.size() << " sessions, whitelist coverage "
      << corpus.manifest.whitelist_coverage << " (" << seconds_since(start) << " s)\n";
  return Json{{"sessions", corpus.sessions.size()},
              {"turns", corpus.manifest.turns},
              {"whitelist_coverage", corpus.manifest.whitelist_coverage},
              {"seconds", seconds_since(start)}};
}

Json cmd_train(ModelKind kind, const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto start = Clock::now();
  const Corpus corpus = load_corpus(config);
  const LabeledSets sets = training_sets(corpus, kind, config);
  const ModelConfig& mc = kind == ModelKind::kFeedback ? config.fp_model : config.hp_model;
  log << "training " << to_string(kind) << " on " << sets.train.size() << " sessions ("
      << sets.validation.size() << " validation)\n";
  std::ostringstream log_lines;
  TrainingResult result = train(sets.train, sets.validation, kind, mc, corpus.schema,
                                [&](const EpochLog& e) {
                                  log_lines << to_json(e).dump() << '\n';
                                  log << "  epoch " << e.epoch << " train_loss " << e.train_loss
                                      << " val_loss " << e.val_loss << " val_pr_auc "
                                      << (e.val_pr_auc ? *e.val_pr_auc : std::nan(""))
                                      << " (" << seconds_since(start) << " s)\n";
                                });
  const bool fp = kind == ModelKind::kFeedback;
  result.model.save(config.resolve(fp ? config.paths.fp_checkpoint : config.paths.hp_checkpoint));
  write_file_atomic(config.resolve(fp ? config.paths.fp_log : config.paths.hp_log),
                    log_lines.str());
  std::optional<double> best_pr_auc;
  for (const auto& e : result.log) {
    if (e.epoch == result.best_epoch) best_pr_auc = e.val_pr_auc;
  }
  return Json{{"kind", std::string(to_string(kind))},
              {"train_sessions", sets.train.size()},
              {"validation_sessions", sets.validation.size()},
              {"best_epoch", result.best_epoch},
              {"val_pr_auc", best_pr_auc ? Json(*best_pr_auc) : Json(nullptr)},
              {"positive_weight", result.positive_weight},
              {"seconds", seconds_since(start)}};
}

namespace {

struct GroundTruthPair {
  GroundTruthSet test;
  GroundTruthSet dev;
};

GroundTruthPair compose_pair(const Corpus& corpus, const RunConfig& config) {
  std::vector<Session> live;
  for (std::size_t i : corpus.split.train) live.push_back(corpus.sessions[i]);
  const auto rates = estimate_rates(live, corpus.whitelist);
  GroundTruthPair gt;
  gt.test = compose_ground_truth(build_pools(corpus, corpus.split.test, rates, config.gt_fraction),
                                 corpus.whitelist, derive_seed(config.seed, "gt-test"),
                                 config.shortfall);
  gt.dev = compose_ground_truth(
      build_pools(corpus, corpus.split.validation, rates, config.gt_fraction), corpus.whitelist,
      derive_seed(config.seed, "gt-dev"), config.shortfall);
  return gt;
}

}  // namespace

Json cmd_compose_gt(const RunConfig& config, std::ostream& log) {
  validate(config);
  const Corpus corpus = load_corpus(config);
  const GroundTruthPair gt = compose_pair(corpus, config);
  save_ground_truth(config.resolve(config.paths.ground_truth), gt.test);
  save_ground_truth(config.resolve(config.paths.dev_ground_truth), gt.dev);
  log << "ground truth: " << gt.test.examples.size() << " test, " << gt.dev.examples.size()
      << " dev examples\n";
  return Json{{"test_examples", gt.test.examples.size()},
              {"dev_examples", gt.dev.examples.size()},
              {"shortfalls", gt.test.shortfalls.size() + gt.dev.shortfalls.size()}};
}

Json cmd_evaluate(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto start = Clock::now();
  const auto fp_path = config.resolve(config.paths.fp_checkpoint);
  const auto hp_path = config.resolve(config.paths.hp_checkpoint);
  require(fp_path, "FP checkpoint", "train --kind fp");
  require(hp_path, "HP checkpoint", "train --kind hp");
  const Corpus corpus = load_corpus(config);

  const auto gt_path = config.resolve(config.paths.ground_truth);
  const auto dev_path = config.resolve(config.paths.dev_ground_truth);
  GroundTruthSet test_gt, dev_gt;
  if (std::filesystem::exists(gt_path) && std::filesystem::exists(dev_path)) {
    test_gt = load_ground_truth(gt_path);
    dev_gt = load_ground_truth(dev_path);
  } else {
    log << "no ground truth found; composing it\n";
    GroundTruthPair pair = compose_pair(corpus, config);
    save_ground_truth(gt_path, pair.test);
    save_ground_truth(dev_path, pair.dev);
    test_gt = std::move(pair.test);
    dev_gt = std::move(pair.dev);
  }
  if (test_gt.whitelist_hash != whitelist_hash(corpus.whitelist)) {
    throw DataError("ground truth was composed for a different whitelist; rerun compose-gt");
  }

  const SatisfactionModel fp = SatisfactionModel::load(fp_path);
  const SatisfactionModel hp = SatisfactionModel::load(hp_path);
  FusionConfig fusion = config.fusion;
  fusion.fp_whitelist = corpus.whitelist;

  const PredictionCache test_cache = score_ground_truth(test_gt, corpus.sessions, fp, hp, fusion);
  const PredictionCache dev_cache = score_ground_truth(dev_gt, corpus.sessions, fp, hp, fusion);
  log << "scored " << test_cache.size() + dev_cache.size() << " sessions ("
      << seconds_since(start) << " s)\n";

  EvaluationRun run;
  const std::vector<ScoredSession> dev = tuning_set(dev_gt, dev_cache);
  for (double tau : config.tau_grid) run.tau_f1.emplace_back(tau, waterfall_f1(dev, fusion, tau));
  run.tau = tune_threshold_scored(dev, config.tau_grid, fusion);
  fusion.tau = run.tau;
  log << "tuned tau " << run.tau << "\n";

  const auto reports = config.resolve(config.paths.reports);
  std::filesystem::create_directories(reports);
  for (double rate : config.rates) {
    const GroundTruthSet marked =
        mark_given_feedback(test_gt, rate, derive_seed(config.seed, "marking"));
    RateResult rr;
    rr.rate = rate;
    rr.marked = static_cast<std::size_t>(
        std::count_if(marked.examples.begin(), marked.examples.end(),
                      [](const auto& e) { return e.given_by_user; }));
    rr.approaches = evaluate_approaches(marked, test_cache, fusion, all_approaches(),
                                        config.top_k, config.coverage_target);
    for (const auto& a : rr.approaches) {
      std::string name(to_string(a.approach));
      std::replace(name.begin(), name.end(), '+', '_');
      save_verdicts(reports / ("verdicts_" + name + "_rate_" + rate_tag(rate) + ".jsonl"),
                    a.verdicts);
    }
    run.rates.push_back(std::move(rr));
  }
  run.ground_truth = std::move(test_gt);

  const std::string hash = config_hash(config);
  const Json report = report_json(run, config);
  write_file_atomic(reports / "report.json", report.dump(2) + "\n");
  const std::string table = format_report_table(run, hash);
  write_file_atomic(reports / "report.txt", table);
  log << table;
  return report;
}

Json cmd_analyze_feedback(const RunConfig& config, std::ostream& log) {
  validate(config);
  const Corpus corpus = load_corpus(config);
  const Json report = to_json(analyze_feedback(corpus), config);
  const auto reports = config.resolve(config.paths.reports);
  std::filesystem::create_directories(reports);
  write_file_atomic(reports / "feedback_analysis.json", report.dump(2) + "\n");
  log << "feedback vs annotation: agreement " << report["agreement_rate"].get<double>()
      << ", kappa " << report["kappa"].dump() << " over " << report["pairs"].get<std::size_t>()
      << " YES/NO sessions\n";
  return report;
}

Json cmd_sweep(const RunConfig& config, std::ostream& log) {
  const auto start = Clock::now();
  Json summary;
  summary["generate"] = cmd_generate(config, log);
  summary["train_fp"] = cmd_train(ModelKind::kFeedback, config, log);
  summary["train_hp"] = cmd_train(ModelKind::kFallback, config, log);
  summary["compose_gt"] = cmd_compose_gt(config, log);
  summary["evaluate"] = cmd_evaluate(config, log);
  summary["analyze_feedback"] = cmd_analyze_feedback(config, log);
  summary["seconds"] = seconds_since(start);
  log << "sweep finished in " << seconds_since(start) << " s\n";
  return summary;
}

}  // namespace satfusion
