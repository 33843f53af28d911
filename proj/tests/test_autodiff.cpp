#include <gtest/gtest.h>

#include "oracles.hpp"
#include "satfusion/checkpoint.hpp"
#include "satfusion/errors.hpp"
#include "satfusion/layers.hpp"

using namespace satfusion;
using satfusion::testing::kGradientTolerance;

TEST(Gradients, EveryLayerKindMatchesCentralDifferences) {
  const auto out = satfusion::testing::check_layer_gradients(20);
  EXPECT_TRUE(out.passed()) << out.first_failure;
  EXPECT_LT(out.worst, kGradientTolerance);
}

TEST(Gradients, FullModelOnTwoTurnSession) {
  const auto out = satfusion::testing::check_model_gradients(20);
  EXPECT_TRUE(out.passed()) << out.first_failure;
}

TEST(Gradients, ErrorMeasureCatchesAWrongGradient) {
  // Scale a parameter behind the graph's back: the tape still reports the
  // old gradient, so the check must flag it.
  ParameterSet ps;
  const ParamId x = ps.add("x", 1, 3);
  ps[x].value << 0.3, -0.2, 0.9;
  double factor = 1.0;
  const double err = satfusion::testing::gradient_error(ps, [&](Graph& g) {
    const Var y = g.scale(g.sigmoid(g.parameter(x)), factor);
    factor = 2.0;  // evaluations after the first use a different function
    return g.sum(y);
  });
  EXPECT_GT(err, 0.1);
}

TEST(Graph, TapeGruMatchesDirectForward) {
  Rng rng(3);
  ParameterSet ps;
  std::vector<LayerSpec> specs;
  const GruLayer gru = make_gru(ps, specs, "gru", 3, 4, rng);
  satfusion::testing::randomize(ps, rng);
  Matrix x(5, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  Graph g(ps, false);
  const Matrix taped = g.value(g.gru(g.constant(x), gru));
  EXPECT_TRUE(taped.isApprox(gru_forward(x, ps, gru), 1e-14));
  EXPECT_EQ(taped.rows(), 5);
  EXPECT_EQ(taped.cols(), 4);
}

TEST(Graph, AttentionWeightsFormADistribution) {
  Rng rng(4);
  ParameterSet ps;
  std::vector<LayerSpec> specs;
  const AttentionLayer att = make_attention(ps, specs, "att", 4, 3, rng);
  Matrix states(6, 4);
  for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = rng.normal();
  const Vector w = attention_weights(states, ps, att);
  EXPECT_NEAR(w.sum(), 1.0, 1e-12);
  EXPECT_GE(w.minCoeff(), 0.0);
  const RowVector pooled = attention_pool_forward(states, ps, att);
  EXPECT_TRUE(pooled.isApprox(w.transpose() * states, 1e-12));
}

TEST(Graph, MisuseIsReported) {
  ParameterSet ps;
  const ParamId x = ps.add("x", 1, 2);
  Graph g(ps);
  const Var loss = g.sum(g.parameter(x));
  g.backward(loss);
  EXPECT_THROW(g.backward(loss), UsageError);

  Graph frozen(ps, false);
  EXPECT_THROW(frozen.backward(frozen.sum(frozen.parameter(x))), UsageError);

  Graph h(ps);
  EXPECT_THROW(h.backward(h.parameter(x)), ShapeError);
  EXPECT_THROW(h.add(h.constant(Matrix::Zero(1, 2)), h.constant(Matrix::Zero(1, 3))), ShapeError);
  EXPECT_THROW(ps.add("x", 1, 1), UsageError);
  EXPECT_THROW(ps.add("empty", 0, 1), ShapeError);
}

TEST(Graph, GradientsAccumulateAcrossGraphs) {
  ParameterSet ps;
  const ParamId x = ps.add("x", 1, 2);
  ps[x].value << 1.0, 2.0;
  ps.zero_grad();
  for (int i = 0; i < 3; ++i) {
    Graph g(ps);
    g.backward(g.sum(g.parameter(x)));
    g.accumulate_into(ps);
  }
  EXPECT_DOUBLE_EQ(ps[x].grad(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(ps[x].grad(0, 1), 3.0);
}

TEST(Layers, SpecsValidate) {
  EXPECT_THROW(validate(LayerSpec{"e", LayerKind::kEmbedding, 1, 4}), ShapeError);
  EXPECT_THROW(validate(LayerSpec{"d", LayerKind::kDense, 0, 4}), ShapeError);
  EXPECT_NO_THROW(validate(LayerSpec{"d", LayerKind::kDense, 3, 4}));
  EXPECT_EQ(parse_activation(to_string(Activation::kRelu)), Activation::kRelu);
  EXPECT_THROW(parse_activation("swish"), ConfigError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(5);
  ParameterSet ps;
  std::vector<LayerSpec> specs;
  make_dense(ps, specs, "head", 3, 2, Activation::kTanh, rng);
  satfusion::testing::randomize(ps, rng);
  const Json header{{"note", "x"}};
  const std::string bytes = serialize_checkpoint(header, ps);
  const Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.header, header);
  ASSERT_EQ(back.params.size(), ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(back.params[ParamId{i}].name, ps[ParamId{i}].name);
    EXPECT_EQ(back.params[ParamId{i}].value, ps[ParamId{i}].value);
  }
  EXPECT_EQ(serialize_checkpoint(back.header, back.params), bytes);
}

TEST(Checkpoint, CorruptionIsRefused) {
  ParameterSet ps;
  ps.add("w", 2, 2);
  const std::string bytes = serialize_checkpoint(Json::object(), ps);
  std::string flipped = bytes;
  flipped[flipped.size() - 12] ^= 0x40;
  EXPECT_THROW(deserialize_checkpoint(flipped), IoError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), IoError);
  EXPECT_THROW(deserialize_checkpoint("nonsense"), IoError);
}
