#pragma once

#include <string>
#include <vector>

#include "satfusion/autodiff.hpp"
#include "satfusion/random.hpp"

namespace satfusion {

enum class LayerKind { kEmbedding, kGru, kAttentionPool, kDense, kSigmoid, kConcat };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);
std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

/// Descriptive record of one layer, stored in checkpoint headers.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kDense;
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
  Activation activation = Activation::kNone;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Throws ShapeError unless dimensions are positive and an embedding has at
/// least the padding and out-of-vocabulary rows.
void validate(const LayerSpec& spec);

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
void init_uniform(Parameter& param, Eigen::Index fan_in, Rng& rng);

// Factories register parameters named "<prefix>.<part>", initialize weights
// uniformly with zero biases, and append a LayerSpec.

ParamId make_embedding(ParameterSet& params, std::vector<LayerSpec>& specs,
                       const std::string& prefix, Eigen::Index vocab, Eigen::Index dim, Rng& rng);

GruLayer make_gru(ParameterSet& params, std::vector<LayerSpec>& specs, const std::string& prefix,
                  Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng);

AttentionLayer make_attention(ParameterSet& params, std::vector<LayerSpec>& specs,
                              const std::string& prefix, Eigen::Index state_dim,
                              Eigen::Index attention_dim, Rng& rng);

DenseLayer make_dense(ParameterSet& params, std::vector<LayerSpec>& specs,
                      const std::string& prefix, Eigen::Index input_dim, Eigen::Index output_dim,
                      Activation activation, Rng& rng);

}  // namespace satfusion
