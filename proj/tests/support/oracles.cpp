#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "satfusion/errors.hpp"
#include "satfusion/fusion.hpp"
#include "satfusion/ground_truth.hpp"
#include "satfusion/layers.hpp"
#include "satfusion/metrics.hpp"

namespace satfusion::testing {

Session toy_session(Rng& rng, std::size_t turns, const std::string& intent) {
  static const std::vector<std::string> users{"what is the weather", "play some jazz",
                                              "no i said jazz", "turn off the lights",
                                              "set a timer"};
  static const std::vector<std::string> agents{"it is sunny today", "sorry i am not sure",
                                               "playing jazz", "okay", "here is something"};
  Session s;
  s.session_id = "toy-" + std::to_string(rng.index(1000000));
  for (std::size_t i = 0; i < turns; ++i) {
    Turn t;
    t.user_text = rng.pick(users);
    t.agent_text = rng.pick(agents);
    t.timestamp = 1000.0 + 10.0 * static_cast<double>(i);
    t.intent = i == 0 ? intent : rng.pick(std::vector<std::string>{intent, "PlayMusicIntent"});
    t.meta_categorical = {{"skill", rng.bernoulli(0.5) ? "weather" : "music"},
                          {"device_screen", rng.bernoulli(0.5) ? "yes" : "no"}};
    t.meta_numerical = {{"response_latency_s", rng.uniform(0.5, 2.0)},
                        {"turn_index_in_session", static_cast<double>(i)}};
    s.turns.push_back(std::move(t));
  }
  s.session_categorical = {{"device_type", rng.bernoulli(0.5) ? "speaker" : "phone"}};
  s.session_numerical = {{"session_length", static_cast<double>(turns)}};
  s.segment = Segment{intent, "weather", false};
  s.label = rng.bernoulli(0.5) ? 1 : 0;
  return s;
}

ModelConfig tiny_model_config(std::uint64_t seed) {
  ModelConfig c;
  c.d_emb = 3;
  c.d_turn_gru = 4;
  c.d_session_gru = 4;
  c.dense_sizes = {4, 3};
  c.categorical_dim = 2;
  c.numeric_dim = 3;
  c.vocab_min_freq = 1;
  c.max_tokens = 6;
  c.seed = seed;
  return c;
}

void randomize(ParameterSet& params, Rng& rng, double scale) {
  for (auto& p : params) {
    if (!p.trainable) continue;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = scale * rng.normal();
  }
}

double gradient_error(ParameterSet& params, const std::function<Var(Graph&)>& loss,
                      double step) {
  Graph g(params);
  g.backward(loss(g));
  auto eval = [&] {
    Graph f(params, false);
    return f.scalar(loss(f));
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[ParamId{k}];
    if (!p.trainable) continue;
    const Matrix analytic = g.gradient(ParamId{k});
    Matrix numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + step;
      const double up = eval();
      x = saved - step;
      const double down = eval();
      x = saved;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const double denom = std::max(analytic.norm() + numeric.norm(), 1e-6);
    worst = std::max(worst, (analytic - numeric).norm() / denom);
  }
  return worst;
}

namespace {

Eigen::Index dim(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
}

// Nonlinear readout so no gradient is uniform across entries.
Var readout(Graph& g, Var x) { return g.sum(g.sigmoid(x)); }

void record(CheckOutcome& out, double error, const std::string& what) {
  ++out.cases;
  out.worst = std::max(out.worst, error);
  if (!(error < kGradientTolerance)) {
    std::ostringstream msg;
    msg << what << " relative error " << error;
    out.fail(msg.str());
  }
}

}  // namespace

CheckOutcome check_layer_gradients(std::size_t seeds) {
  CheckOutcome out;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    Rng rng(derive_seed(seed, "layer-gradients"));
    std::vector<LayerSpec> specs;
    const std::string tag = " seed " + std::to_string(seed);

    {
      ParameterSet ps;
      const Eigen::Index vocab = dim(rng, 3, 8);
      const ParamId table = make_embedding(ps, specs, "emb", vocab, dim(rng, 2, 5), rng);
      std::vector<int> ids(dim(rng, 1, 6));
      for (auto& id : ids) id = static_cast<int>(rng.index(static_cast<std::size_t>(vocab)));
      randomize(ps, rng);
      record(out, gradient_error(ps, [&](Graph& g) { return readout(g, g.embed(table, ids)); }),
             "embedding" + tag);
    }
    {
      ParameterSet ps;
      const Eigen::Index d_in = dim(rng, 1, 4);
      const Eigen::Index steps = dim(rng, 1, 5);
      const ParamId x = ps.add("x", steps, d_in);
      const GruLayer gru = make_gru(ps, specs, "gru", d_in, dim(rng, 1, 5), rng);
      randomize(ps, rng);
      record(out,
             gradient_error(ps, [&](Graph& g) { return readout(g, g.gru(g.parameter(x), gru)); }),
             "gru" + tag);
    }
    {
      ParameterSet ps;
      const Eigen::Index h = dim(rng, 1, 5);
      const ParamId states = ps.add("states", dim(rng, 1, 6), h);
      const AttentionLayer att = make_attention(ps, specs, "att", h, dim(rng, 1, 4), rng);
      randomize(ps, rng);
      record(out, gradient_error(ps, [&](Graph& g) {
               return readout(g, g.attention_pool(g.parameter(states), att));
             }),
             "attention" + tag);
    }
    for (Activation act : {Activation::kNone, Activation::kTanh, Activation::kRelu}) {
      ParameterSet ps;
      const Eigen::Index d_in = dim(rng, 1, 5);
      const ParamId x = ps.add("x", 1, d_in);
      const DenseLayer dense = make_dense(ps, specs, "dense", d_in, dim(rng, 1, 5), act, rng);
      randomize(ps, rng);
      record(out, gradient_error(ps, [&](Graph& g) {
               return readout(g, g.dense(g.parameter(x), dense));
             }),
             "dense " + std::string(to_string(act)) + tag);
    }
    {
      ParameterSet ps;
      const ParamId a = ps.add("a", 1, dim(rng, 1, 4));
      const ParamId b = ps.add("b", 1, dim(rng, 1, 4));
      randomize(ps, rng);
      const double factor = rng.uniform(-2.0, 2.0);
      record(out, gradient_error(ps, [&](Graph& g) {
               const Var parts[2] = {g.parameter(a), g.scale(g.parameter(b), factor)};
               return readout(g, g.concat(parts));
             }),
             "concat/scale" + tag);
    }
    {
      ParameterSet ps;
      const Eigen::Index width = dim(rng, 1, 4);
      const ParamId a = ps.add("a", 1, width);
      const ParamId b = ps.add("b", 1, width);
      randomize(ps, rng);
      record(out, gradient_error(ps, [&](Graph& g) {
               const Var rows[3] = {g.parameter(a), g.add(g.parameter(a), g.parameter(b)),
                                    g.parameter(b)};
               return readout(g, g.stack_rows(rows));
             }),
             "stack_rows/add" + tag);
    }
    {
      ParameterSet ps;
      const ParamId logit = ps.add("logit", 1, 1);
      randomize(ps, rng, 2.0);
      const double label = rng.bernoulli(0.5) ? 1.0 : 0.0;
      const double weight = rng.uniform(0.5, 4.0);
      record(out, gradient_error(ps, [&](Graph& g) {
               return g.bce_with_logits(g.parameter(logit), label, weight);
             }),
             "bce" + tag);
    }
  }
  return out;
}

CheckOutcome check_model_gradients(std::size_t seeds) {
  CheckOutcome out;
  const MetaSchema schema;
  for (std::size_t seed = 0; seed < seeds; ++seed) {
    Rng rng(derive_seed(seed, "model-gradients"));
    std::vector<Session> sessions;
    for (int i = 0; i < 4; ++i) sessions.push_back(toy_session(rng, 2));
    auto model = SatisfactionModel::from_training_data(
        seed % 2 == 0 ? ModelKind::kFeedback : ModelKind::kFallback, tiny_model_config(seed),
        schema, sessions);
    randomize(model.params(), rng);
    const Session& s = sessions.front();
    const double label = static_cast<double>(s.label.value_or(0));
    const double weight = rng.uniform(0.5, 3.0);
    record(out, gradient_error(model.params(), [&](Graph& g) {
             return g.bce_with_logits(model.logit(g, s), label, weight);
           }),
           "full model seed " + std::to_string(seed));
  }
  return out;
}

namespace {

// round(a/d * n) with halves up, in integers.
std::size_t ratio_round(std::size_t a, std::size_t d, std::size_t n) {
  return (2 * a * n + d) / (2 * d);
}

std::vector<PoolExample> make_pool(Rng& rng, std::size_t size, const std::string& prefix,
                                   const std::string& domain) {
  std::vector<PoolExample> pool;
  for (std::size_t i = 0; i < size; ++i) {
    pool.push_back({prefix + "-" + std::to_string(i), rng.bernoulli(0.3) ? 1 : 0, domain});
  }
  return pool;
}

std::string serialized(const GroundTruthSet& gt) {
  std::ostringstream s;
  write_ground_truth(s, gt);
  return s.str();
}

}  // namespace

CheckOutcome check_composition(std::size_t cases) {
  CheckOutcome out;
  for (std::size_t c = 0; c < cases; ++c) {
    Rng rng(derive_seed(c, "composition"));
    const std::string tag = "case " + std::to_string(c) + ": ";
    SegmentPools pools;
    std::set<std::string> whitelist;
    // Exact dyadic rates: numerator/denominator are representable.
    std::map<std::string, std::pair<std::size_t, std::size_t>> ri, ro;
    std::map<std::string, std::size_t> den;
    const std::size_t segments = 1 + rng.index(6);
    for (std::size_t k = 0; k < segments; ++k) {
      SegmentPool p;
      p.segment = "Seg" + std::to_string(k) + "Intent";
      const std::string domain = "Domain" + std::to_string(rng.index(3));
      p.h_ineligible = make_pool(rng, rng.index(16), p.segment + "-hi", domain);
      p.h_eligible = make_pool(rng, rng.index(16), p.segment + "-he", domain);
      p.feedback = make_pool(rng, rng.index(24), p.segment + "-f", domain);
      const std::size_t d = std::size_t{1} << (1 + rng.index(6));
      const std::size_t a = rng.index(d + 1);
      const std::size_t b = rng.index(d + 1);
      p.rate_ineligible = static_cast<double>(a) / static_cast<double>(d);
      p.rate_other = static_cast<double>(b) / static_cast<double>(d);
      ri[p.segment] = {a, d};
      ro[p.segment] = {b, d};
      const bool listed = rng.bernoulli(0.6);
      if (listed) whitelist.insert(p.segment);
      p.target_count = feasible_target(p, listed, rng.index(40));
      pools.push_back(std::move(p));
    }
    const std::uint64_t seed = rng.next();
    GroundTruthSet gt;
    try {
      gt = compose_ground_truth(pools, whitelist, seed);
    } catch (const std::exception& e) {
      ++out.cases;
      out.fail(tag + "compose threw: " + e.what());
      continue;
    }
    ++out.cases;

    std::set<std::string> seen;
    for (const auto& pool : pools) {
      std::map<Provenance, std::size_t> counts;
      std::map<std::string, const PoolExample*> hi, he, f;
      for (const auto& e : pool.h_ineligible) hi[e.session_id] = &e;
      for (const auto& e : pool.h_eligible) he[e.session_id] = &e;
      for (const auto& e : pool.feedback) f[e.session_id] = &e;
      for (const auto& ex : gt.examples) {
        if (ex.segment != pool.segment) continue;
        ++counts[ex.provenance];
        if (!seen.insert(ex.session_id).second) out.fail(tag + "duplicate " + ex.session_id);
        const auto& source = ex.provenance == Provenance::kFeedback ? f
                             : ex.provenance == Provenance::kHOther ? he
                                                                     : hi;
        auto it = source.find(ex.session_id);
        if (it == source.end()) {
          out.fail(tag + ex.session_id + " not in its provenance pool");
        } else if (it->second->label != ex.label || it->second->domain != ex.domain) {
          out.fail(tag + ex.session_id + " label or domain changed");
        }
        if (ex.given_by_user) out.fail(tag + "fresh composition has marked examples");
      }
      const std::size_t n = pool.target_count;
      const std::size_t total = counts[Provenance::kHIneligible] + counts[Provenance::kHOther] +
                                counts[Provenance::kFeedback];
      if (total != n) out.fail(tag + pool.segment + " total differs from N_s");
      if (whitelist.count(pool.segment)) {
        const auto [a, d] = ri[pool.segment];
        const std::size_t n_hi = ratio_round(a, d, n);
        const std::size_t n_ho = ratio_round(ro[pool.segment].first, d, n - n_hi);
        const std::size_t n_f = n - n_hi - n_ho;
        if (counts[Provenance::kHIneligible] != n_hi || counts[Provenance::kHOther] != n_ho ||
            counts[Provenance::kFeedback] != n_f) {
          out.fail(tag + pool.segment + " counts differ from the formula");
        }
        const CompositionCounts lib =
            composition_counts(n, pool.rate_ineligible, pool.rate_other);
        if (lib.ineligible + lib.other + lib.feedback != n) out.fail(tag + "counts do not sum");
      } else if (counts[Provenance::kFeedback] != 0) {
        out.fail(tag + pool.segment + " outside the whitelist drew feedback examples");
      }
    }
    if (seen.size() != gt.examples.size()) out.fail(tag + "examples outside every pool");
    if (serialized(gt) != serialized(compose_ground_truth(pools, whitelist, seed))) {
      out.fail(tag + "rerun with the same seed is not byte-identical");
    }
  }
  return out;
}

namespace {

// Exhaustive thresholding: every distinct score, highest first, classifies
// score >= t as positive; area is the sum of precision times recall gain.
double brute_force_ap(const std::vector<ScoredLabel>& points) {
  std::set<double, std::greater<>> thresholds;
  double positives = 0.0;
  for (const auto& p : points) {
    thresholds.insert(p.score);
    positives += p.label;
  }
  double area = 0.0;
  double last_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (const auto& p : points) {
      if (p.score >= t) {
        predicted += 1.0;
        tp += p.label;
      }
    }
    const double recall = tp / positives;
    area += (recall - last_recall) * (tp / predicted);
    last_recall = recall;
  }
  return area;
}

}  // namespace

CheckOutcome check_pr_auc(std::size_t draws) {
  CheckOutcome out;
  Rng rng(derive_seed(0, "pr-auc-oracle"));
  for (std::size_t d = 0; d < draws; ++d) {
    std::vector<ScoredLabel> points(1 + rng.index(12));
    // Coarse grids force ties, fine ones mostly avoid them.
    const double levels = rng.bernoulli(0.5) ? 4.0 : 1000.0;
    bool any_positive = false;
    for (auto& p : points) {
      p.score = std::round(rng.uniform() * levels) / levels;
      p.label = rng.bernoulli(0.4) ? 1 : 0;
      any_positive = any_positive || p.label == 1;
    }
    ++out.cases;
    if (!any_positive) {
      try {
        pr_auc(points);
        out.fail("draw " + std::to_string(d) + ": no positives but no DataError");
      } catch (const DataError&) {
      }
      continue;
    }
    const double err = std::abs(pr_auc(points) - brute_force_ap(points));
    out.worst = std::max(out.worst, err);
    if (!(err <= 1e-9)) out.fail("draw " + std::to_string(d) + ": error " + std::to_string(err));
  }
  return out;
}

CheckOutcome check_kappa(std::size_t tables) {
  CheckOutcome out;
  Rng rng(derive_seed(0, "kappa-oracle"));
  for (std::size_t t = 0; t < tables; ++t) {
    // a: both 1, b: first 1 second 0, c: first 0 second 1, d: both 0.
    std::size_t a = rng.index(40), b = rng.index(40), c = rng.index(40), d = rng.index(40);
    if (t % 10 == 0) b = c = 0;  // perfect agreement
    if (a + b + c + d == 0) d = 1;
    std::vector<std::pair<int, int>> pairs;
    pairs.insert(pairs.end(), a, {1, 1});
    pairs.insert(pairs.end(), b, {1, 0});
    pairs.insert(pairs.end(), c, {0, 1});
    pairs.insert(pairs.end(), d, {0, 0});
    rng.shuffle(pairs);
    const double n = static_cast<double>(a + b + c + d);
    const double po = static_cast<double>(a + d) / n;
    const double pe = (static_cast<double>((a + b) * (a + c)) +
                       static_cast<double>((c + d) * (b + d))) / (n * n);
    const Agreement got = agreement_and_kappa(pairs);
    ++out.cases;
    const std::string tag = "table " + std::to_string(t) + ": ";
    if (std::abs(got.agreement_rate - po) > 1e-12) out.fail(tag + "agreement rate");
    if (pe == 1.0) {
      if (got.kappa) out.fail(tag + "kappa should be undefined");
      continue;
    }
    const double kappa = (po - pe) / (1.0 - pe);
    if (!got.kappa) {
      out.fail(tag + "kappa missing");
      continue;
    }
    const double err = std::abs(*got.kappa - kappa);
    out.worst = std::max(out.worst, err);
    if (!(err <= 1e-12)) out.fail(tag + "kappa error " + std::to_string(err));
  }
  return out;
}

namespace {

struct ModelPair {
  SatisfactionModel fp;
  SatisfactionModel hp;
};

ModelPair tiny_models() {
  Rng rng(derive_seed(0, "tiny-models"));
  std::vector<Session> sessions;
  for (int i = 0; i < 8; ++i) sessions.push_back(toy_session(rng, 3));
  const MetaSchema schema;
  return {SatisfactionModel::from_training_data(ModelKind::kFeedback, tiny_model_config(1),
                                                schema, sessions),
          SatisfactionModel::from_training_data(ModelKind::kFallback, tiny_model_config(2),
                                                schema, sessions)};
}

const std::vector<std::string> kIntents{"GetWeatherIntent", "PlayMusicIntent", "SetTimerIntent"};

Session random_session(Rng& rng, FeedbackCategory feedback) {
  Session s = toy_session(rng, 1 + rng.index(4), rng.pick(kIntents));
  s.target_index = rng.index(s.turns.size());
  Turn& target = s.turns[s.target_index];
  for (TurnFlag f : {TurnFlag::kBargeIn, TurnFlag::kTermination, TurnFlag::kUnhandled}) {
    if (rng.bernoulli(0.15)) target.flags.set(f);
  }
  s.feedback = feedback;
  if (feedback != FeedbackCategory::kNoneElicited) {
    target.flags.set(TurnFlag::kElicitationPrompt);
    target.agent_text += " did i answer your question";
  }
  return s;
}

FusionConfig random_fusion(Rng& rng) {
  FusionConfig c;
  c.tau = rng.uniform(0.5, 1.0);
  for (const auto& intent : kIntents) {
    if (rng.bernoulli(0.5)) c.fp_whitelist.insert(intent);
  }
  return c;
}

FeedbackCategory random_feedback(Rng& rng) {
  static const std::vector<FeedbackCategory> all{
      FeedbackCategory::kYes, FeedbackCategory::kNo, FeedbackCategory::kSilence,
      FeedbackCategory::kOther, FeedbackCategory::kNoneElicited};
  return rng.pick(all);
}

}  // namespace

CheckOutcome check_explicit_precedence(std::size_t cases) {
  CheckOutcome out;
  ModelPair models = tiny_models();
  Rng rng(derive_seed(0, "explicit-precedence"));
  for (std::size_t c = 0; c < cases; ++c) {
    const auto feedback = rng.bernoulli(0.5) ? FeedbackCategory::kYes : FeedbackCategory::kNo;
    const Session s = random_session(rng, feedback);
    const FusionConfig config = random_fusion(rng);
    randomize(models.fp.params(), rng, rng.uniform(0.1, 3.0));
    randomize(models.hp.params(), rng, rng.uniform(0.1, 3.0));
    const Verdict before = assess(s, models.fp, models.hp, config);
    randomize(models.fp.params(), rng, rng.uniform(0.1, 3.0));
    randomize(models.hp.params(), rng, rng.uniform(0.1, 3.0));
    const Verdict after = assess(s, models.fp, models.hp, config);
    const bool expected = feedback == FeedbackCategory::kNo;
    ++out.cases;
    const std::string tag = "case " + std::to_string(c) + ": ";
    if (before.source != VerdictSource::kExplicit || after.source != VerdictSource::kExplicit) {
      out.fail(tag + "explicit feedback not taken first");
    }
    if (before.dissatisfied != expected || after.dissatisfied != expected ||
        before.score != after.score || before.threshold_used || after.threshold_used) {
      out.fail(tag + "explicit verdict depends on the models");
    }
    // Stage one must not even evaluate a model.
    bool touched = false;
    waterfall(feedback, rng.bernoulli(0.5), config, [&] { touched = true; return 0.9; },
              [&] { touched = true; return 0.1; });
    if (touched) out.fail(tag + "a model was evaluated despite explicit feedback");
  }
  return out;
}

CheckOutcome check_monotone_deferral(std::size_t cases) {
  CheckOutcome out;
  Rng rng(derive_seed(0, "monotone-deferral"));
  for (std::size_t c = 0; c < cases; ++c) {
    ScoredSession s;
    s.feedback = random_feedback(rng);
    s.fp_eligible = rng.bernoulli(0.7);
    // Half the scores sit on the tau grid's boundaries.
    s.fp_score = rng.bernoulli(0.5) ? rng.uniform() : 0.05 * static_cast<double>(rng.index(21));
    s.hp_score = rng.uniform();
    std::vector<double> taus = default_tau_grid();
    for (int i = 0; i < 5; ++i) taus.push_back(rng.uniform(0.5, 1.0));
    std::sort(taus.begin(), taus.end());
    FusionConfig config;
    bool deferred = false;
    ++out.cases;
    for (double tau : taus) {
      config.tau = tau;
      const Verdict v = assess_scored(s, config);
      const bool from_fp = v.source == VerdictSource::kFeedbackModel;
      if (deferred && from_fp) {
        out.fail("case " + std::to_string(c) + ": FP verdict again at tau " + std::to_string(tau));
        break;
      }
      deferred = deferred || (!from_fp && s.fp_eligible && !interpretable(s.feedback));
    }
  }
  return out;
}

CheckOutcome check_fp_only_eligible(std::size_t cases) {
  CheckOutcome out;
  ModelPair models = tiny_models();
  Rng rng(derive_seed(0, "fp-only-eligible"));
  std::size_t fp_verdicts = 0;
  for (std::size_t c = 0; c < cases; ++c) {
    const Session s = random_session(rng, random_feedback(rng));
    FusionConfig config = random_fusion(rng);
    config.tau = rng.uniform(0.5, 0.7);
    randomize(models.fp.params(), rng, rng.uniform(0.5, 3.0));
    const Verdict v = assess(s, models.fp, models.hp, config);
    ++out.cases;
    if (v.source != VerdictSource::kFeedbackModel) continue;
    ++fp_verdicts;
    const bool listed = config.fp_whitelist.count(s.target().intent) == 1;
    if (!listed || s.target().flags.ineligible() || interpretable(s.feedback)) {
      out.fail("case " + std::to_string(c) + ": FP verdict on an ineligible experience");
    }
  }
  // A vacuous pass would prove nothing.
  if (fp_verdicts == 0) out.fail("no FP verdicts were produced");
  return out;
}

}  // namespace satfusion::testing
