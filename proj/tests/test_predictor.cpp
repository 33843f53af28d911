#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "satfusion/checkpoint.hpp"
#include "satfusion/errors.hpp"
#include "satfusion/metrics.hpp"
#include "satfusion/synth.hpp"
#include "satfusion/training.hpp"

using namespace satfusion;
using satfusion::testing::tiny_model_config;
using satfusion::testing::toy_session;

namespace {

SatisfactionModel tiny_model(ModelKind kind = ModelKind::kFallback, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<Session> sessions;
  for (int i = 0; i < 6; ++i) sessions.push_back(toy_session(rng, 3));
  return SatisfactionModel::from_training_data(kind, tiny_model_config(seed), MetaSchema{},
                                               sessions);
}

}  // namespace

TEST(TurnWindow, GrowsAroundTheTargetFollowingTurnFirst) {
  EXPECT_EQ(turn_window(5, 2, 1), (std::pair<std::size_t, std::size_t>{2, 3}));
  EXPECT_EQ(turn_window(5, 2, 2), (std::pair<std::size_t, std::size_t>{2, 4}));
  EXPECT_EQ(turn_window(5, 2, 3), (std::pair<std::size_t, std::size_t>{1, 4}));
  EXPECT_EQ(turn_window(5, 4, 3), (std::pair<std::size_t, std::size_t>{2, 5}));
  EXPECT_EQ(turn_window(3, 0, 10), (std::pair<std::size_t, std::size_t>{0, 3}));
  for (std::size_t n = 1; n < 12; ++n) {
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t m = 1; m < 14; ++m) {
        const auto [lo, hi] = turn_window(n, t, m);
        EXPECT_LE(lo, t);
        EXPECT_GT(hi, t);
        EXPECT_LE(hi, n);
        EXPECT_EQ(hi - lo, std::min(n, m));
      }
    }
  }
}

TEST(Model, EncodingDimensionsFollowTheConfig) {
  const SatisfactionModel m = tiny_model();
  const ModelConfig& c = m.config();
  EXPECT_EQ(m.turn_encoding_dim(), 2 * c.d_turn_gru + 2 * c.categorical_dim + c.numeric_dim);
  EXPECT_EQ(m.session_encoding_dim(), c.d_session_gru + c.categorical_dim + c.numeric_dim);

  Rng rng(2);
  const Session s = toy_session(rng, 3);
  Graph g(m.params(), false);
  EXPECT_EQ(g.value(m.encode_turn(g, s, 1)).cols(), m.turn_encoding_dim());
  EXPECT_EQ(g.value(m.encode_session(g, s)).cols(), m.session_encoding_dim());
  EXPECT_EQ(g.value(m.logit(g, s)).size(), 1);
}

TEST(Model, PredictionsAreDeterministicAndBounded) {
  const SatisfactionModel a = tiny_model(ModelKind::kFeedback, 3);
  const SatisfactionModel b = tiny_model(ModelKind::kFeedback, 3);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const Session s = toy_session(rng, 1 + rng.index(12));
    const double p = a.probability(s);
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
    EXPECT_EQ(p, b.probability(s));
  }
}

TEST(Model, PaddingOnlyTextStillEncodes) {
  const SatisfactionModel m = tiny_model();
  Rng rng(5);
  Session s = toy_session(rng, 2);
  for (auto& t : s.turns) t.user_text = t.agent_text = "";
  EXPECT_NO_THROW(m.probability(s));
  s.turns.clear();
  EXPECT_THROW(m.probability(s), DataError);
}

TEST(Model, ElicitationIsInvisibleToTheModel) {
  const SatisfactionModel m = tiny_model();
  Rng rng(6);
  Session s = toy_session(rng, 2);
  const double before = m.probability(s);
  s.turns[0].agent_text += " did i answer your question";
  s.turns[0].flags.set(TurnFlag::kElicitationPrompt);
  Turn answer = s.turns[0];
  answer.user_text = "no";
  answer.agent_text = "thanks";
  answer.flags = {TurnFlag::kAnsweringTurn};
  s.turns.insert(s.turns.begin() + 1, answer);
  s.feedback = FeedbackCategory::kNo;
  EXPECT_DOUBLE_EQ(m.probability(s), before);
}

TEST(Model, ZeroOutputLayerGivesOneHalf) {
  SatisfactionModel m = tiny_model();
  m.zero_output_layer();
  Rng rng(7);
  EXPECT_DOUBLE_EQ(m.probability(toy_session(rng, 4)), 0.5);
}

TEST(Model, CheckpointReproducesPredictions) {
  SatisfactionModel m = tiny_model(ModelKind::kFeedback, 8);
  Rng rng(8);
  satfusion::testing::randomize(m.params(), rng);
  const auto path = std::filesystem::temp_directory_path() / "satfusion_model_test.ckpt";
  m.save(path);
  const SatisfactionModel back = SatisfactionModel::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.kind(), ModelKind::kFeedback);
  EXPECT_EQ(back.config(), m.config());
  EXPECT_EQ(back.vocab_hash(), m.vocab_hash());
  for (int i = 0; i < 10; ++i) {
    const Session s = toy_session(rng, 1 + rng.index(4));
    EXPECT_EQ(back.probability(s), m.probability(s));
  }
  EXPECT_EQ(back.to_checkpoint_bytes(), m.to_checkpoint_bytes());
}

TEST(Model, CheckpointWithForeignVocabularyIsRefused) {
  const SatisfactionModel m = tiny_model();
  Checkpoint ck = deserialize_checkpoint(m.to_checkpoint_bytes());
  ck.header["vocab_hash"] = "0";
  EXPECT_THROW(SatisfactionModel::from_checkpoint_bytes(serialize_checkpoint(ck.header, ck.params)),
               IoError);
  EXPECT_THROW(SatisfactionModel::load("/nonexistent/model.ckpt"), IoError);
}

TEST(ModelConfig, ValidationAndJson) {
  ModelConfig c;
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  c.d_emb = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = ModelConfig{};
  c.learning_rate = -1.0;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_EQ(parse_model_kind("fp"), ModelKind::kFeedback);
  EXPECT_THROW(parse_model_kind("xx"), ConfigError);
}

TEST(Training, SplitIsAPartition) {
  const DatasetSplit s = split_80_10_10(1003, 5);
  EXPECT_EQ(s.train.size(), 802u);
  EXPECT_EQ(s.validation.size(), 100u);
  EXPECT_EQ(s.test.size(), 101u);
  std::vector<int> seen(1003, 0);
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (auto i : *part) ++seen[i];
  }
  EXPECT_EQ(std::count(seen.begin(), seen.end(), 1), 1003);
  const DatasetSplit again = split_80_10_10(1003, 5);
  EXPECT_EQ(again.train, s.train);
}

TEST(Training, ClippingBoundsTheGlobalNorm) {
  ParameterSet ps;
  const ParamId a = ps.add("a", 1, 2);
  ps[a].grad << 3.0, 4.0;
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(ps.grad_norm(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 10.0), 1.0);
  EXPECT_NEAR(ps.grad_norm(), 1.0, 1e-12);
}

TEST(Training, AdamMovesAgainstTheGradient) {
  ParameterSet ps;
  const ParamId a = ps.add("a", 1, 1);
  ps[a].value(0, 0) = 3.0;
  AdamOptimizer adam(ps, 0.1);
  for (int i = 0; i < 200; ++i) {
    ps[a].grad(0, 0) = 2.0 * ps[a].value(0, 0);  // d/dx x^2
    adam.step(ps);
  }
  EXPECT_LT(std::abs(ps[a].value(0, 0)), 0.05);
}

TEST(Training, LearnsSeparableSyntheticTraffic) {
  GeneratorConfig g;
  g.num_sessions = 700;
  g.num_intents = 6;
  g.num_domains = 3;
  g.head_domains = 3;
  g.covert_failure_share = 0.0;
  g.generic_answer_rate = 0.0;
  g.separability_jitter = 0.0;
  g.lexical_separability = 1.0;
  const GeneratedCorpus corpus = generate(g);
  std::vector<Session> train_set, val_set;
  for (std::size_t i = 0; i < corpus.sessions.size(); ++i) {
    (i % 5 == 0 ? val_set : train_set).push_back(corpus.sessions[i]);
  }
  ModelConfig c = tiny_model_config(3);
  c.d_emb = 8;
  c.d_turn_gru = 8;
  c.d_session_gru = 8;
  c.epochs = 6;
  c.learning_rate = 1e-2;
  c.max_tokens = 16;
  std::size_t callbacks = 0;
  const TrainingResult r = train(train_set, val_set, ModelKind::kFallback, c, MetaSchema{},
                                 [&](const EpochLog&) { ++callbacks; });
  EXPECT_EQ(callbacks, r.log.size());
  ASSERT_FALSE(r.log.empty());
  EXPECT_GT(*r.log[r.best_epoch - 1].val_pr_auc, 0.9);
  EXPECT_GT(r.positive_weight, 1.0);

  std::vector<ScoredLabel> scored;
  for (const auto& s : val_set) scored.push_back({r.model.probability(s), *s.label});
  EXPECT_DOUBLE_EQ(pr_auc(scored), *r.log[r.best_epoch - 1].val_pr_auc);
}

TEST(Training, RejectsSingleClassAndUnlabeledData) {
  Rng rng(9);
  std::vector<Session> same;
  for (int i = 0; i < 6; ++i) {
    Session s = toy_session(rng, 2);
    s.label = 0;
    same.push_back(s);
  }
  EXPECT_THROW(train(same, same, ModelKind::kFallback, tiny_model_config(1), MetaSchema{}),
               DataError);
  same[0].label.reset();
  same[1].label = 1;
  EXPECT_THROW(train(same, same, ModelKind::kFallback, tiny_model_config(1), MetaSchema{}),
               DataError);
}
