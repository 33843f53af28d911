#include "satfusion/layers.hpp"

#include <array>
#include <cmath>

#include "satfusion/errors.hpp"

namespace satfusion {

namespace {

constexpr std::array<std::string_view, 6> kKindNames{"EMBEDDING", "GRU",     "ATTENTION_POOL",
                                                     "DENSE",     "SIGMOID", "CONCAT"};
constexpr std::array<std::string_view, 3> kActivationNames{"NONE", "TANH", "RELU"};

}  // namespace

std::string_view to_string(LayerKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

LayerKind parse_layer_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  }
  throw DataError("unknown layer kind '" + std::string(name) + "'");
}

std::string_view to_string(Activation activation) {
  return kActivationNames.at(static_cast<std::size_t>(activation));
}

Activation parse_activation(std::string_view name) {
  for (std::size_t i = 0; i < kActivationNames.size(); ++i) {
    if (kActivationNames[i] == name) return static_cast<Activation>(i);
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void validate(const LayerSpec& spec) {
  if (spec.input_dim <= 0 || spec.output_dim <= 0) {
    throw ShapeError("layer '" + spec.name + "' needs positive dimensions");
  }
  if (spec.kind == LayerKind::kEmbedding && spec.input_dim < 2) {
    throw ShapeError("embedding '" + spec.name + "' needs a vocabulary of at least 2");
  }
}

void init_uniform(Parameter& param, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < param.value.cols(); ++j) {
    for (Eigen::Index i = 0; i < param.value.rows(); ++i) {
      param.value(i, j) = rng.uniform(-bound, bound);
    }
  }
}

ParamId make_embedding(ParameterSet& params, std::vector<LayerSpec>& specs,
                       const std::string& prefix, Eigen::Index vocab, Eigen::Index dim, Rng& rng) {
  LayerSpec spec{prefix, LayerKind::kEmbedding, vocab, dim, Activation::kNone};
  validate(spec);
  const ParamId table = params.add(prefix + ".table", vocab, dim);
  // Embedding rows are looked up, not multiplied; fan-in is the row width.
  init_uniform(params[table], dim, rng);
  specs.push_back(spec);
  return table;
}

GruLayer make_gru(ParameterSet& params, std::vector<LayerSpec>& specs, const std::string& prefix,
                  Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng) {
  LayerSpec spec{prefix, LayerKind::kGru, input_dim, hidden_dim, Activation::kTanh};
  validate(spec);
  GruLayer layer;
  layer.input_dim = input_dim;
  layer.hidden_dim = hidden_dim;
  layer.w_input = params.add(prefix + ".w_input", input_dim, 3 * hidden_dim);
  layer.w_hidden = params.add(prefix + ".w_hidden", hidden_dim, 3 * hidden_dim);
  layer.bias = params.add(prefix + ".bias", 1, 3 * hidden_dim);
  init_uniform(params[layer.w_input], input_dim, rng);
  init_uniform(params[layer.w_hidden], hidden_dim, rng);
  specs.push_back(spec);
  return layer;
}

AttentionLayer make_attention(ParameterSet& params, std::vector<LayerSpec>& specs,
                              const std::string& prefix, Eigen::Index state_dim,
                              Eigen::Index attention_dim, Rng& rng) {
  LayerSpec spec{prefix, LayerKind::kAttentionPool, state_dim, state_dim, Activation::kTanh};
  validate(spec);
  if (attention_dim <= 0) throw ShapeError("attention '" + prefix + "' needs positive width");
  AttentionLayer layer;
  layer.state_dim = state_dim;
  layer.attention_dim = attention_dim;
  layer.projection = params.add(prefix + ".projection", state_dim, attention_dim);
  layer.bias = params.add(prefix + ".bias", 1, attention_dim);
  layer.context = params.add(prefix + ".context", attention_dim, 1);
  init_uniform(params[layer.projection], state_dim, rng);
  init_uniform(params[layer.context], attention_dim, rng);
  specs.push_back(spec);
  return layer;
}

DenseLayer make_dense(ParameterSet& params, std::vector<LayerSpec>& specs,
                      const std::string& prefix, Eigen::Index input_dim, Eigen::Index output_dim,
                      Activation activation, Rng& rng) {
  LayerSpec spec{prefix, LayerKind::kDense, input_dim, output_dim, activation};
  validate(spec);
  DenseLayer layer;
  layer.input_dim = input_dim;
  layer.output_dim = output_dim;
  layer.activation = activation;
  layer.weight = params.add(prefix + ".weight", input_dim, output_dim);
  layer.bias = params.add(prefix + ".bias", 1, output_dim);
  init_uniform(params[layer.weight], input_dim, rng);
  specs.push_back(spec);
  return layer;
}

}  // namespace satfusion
