#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "satfusion/autodiff.hpp"
#include "satfusion/dialog.hpp"
#include "satfusion/dialog_io.hpp"
#include "satfusion/layers.hpp"
#include "satfusion/text.hpp"

namespace satfusion {

/// FP is trained on explicit feedback labels, HP on human annotation.
enum class ModelKind { kFeedback, kFallback };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelConfig {
  Eigen::Index d_emb = 64;
  Eigen::Index d_turn_gru = 96;
  Eigen::Index d_session_gru = 96;
  std::array<Eigen::Index, 2> dense_sizes{64, 32};
  Eigen::Index categorical_dim = 8;
  Eigen::Index numeric_dim = 16;
  Activation head_activation = Activation::kTanh;
  Activation numeric_activation = Activation::kTanh;
  std::size_t vocab_min_freq = 2;
  std::size_t max_turns = 10;
  std::size_t max_tokens = 32;
  /// Positive-class loss weight; unset means negatives/positives of the
  /// training split.
  std::optional<double> class_weight_positive;
  double learning_rate = 1e-3;
  double grad_clip = 5.0;
  std::size_t batch_size = 32;
  std::size_t epochs = 8;
  std::size_t patience = 2;
  std::uint64_t seed = 7;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws ConfigError on non-positive sizes or weights.
void validate(const ModelConfig& config);

Json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

struct Prediction {
  double p = 0.0;  // probability the user is dissatisfied
  std::string session_id;
};

/// Inclusive-exclusive window of at most max_turns positions that contains
/// target, growing outward one neighbor at a time (following turn first).
std::pair<std::size_t, std::size_t> turn_window(std::size_t turn_count, std::size_t target,
                                                std::size_t max_turns);

/// Hierarchical satisfaction model: per-turn GRU + attention encoders for the
/// user and agent text, turn-level categorical embeddings and a numeric
/// encoder, a session-level GRU + attention over turn vectors, session-level
/// features, and a two-layer head ending in a sigmoid.
class SatisfactionModel {
 public:
  struct Vocabularies {
    Vocabulary tokens;
    std::map<std::string, CategoryVocabulary> turn_categorical;
    std::map<std::string, CategoryVocabulary> session_categorical;
  };

  /// Fresh model with seeded initialization. Numeric features are scaled
  /// with the supplied per-feature means and standard deviations.
  SatisfactionModel(ModelKind kind, ModelConfig config, MetaSchema schema, Vocabularies vocab);

  /// Builds vocabularies and numeric scaling from training sessions, then
  /// initializes parameters.
  static SatisfactionModel from_training_data(ModelKind kind, const ModelConfig& config,
                                              const MetaSchema& schema,
                                              std::span<const Session> sessions);

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  const MetaSchema& schema() const { return schema_; }
  const Vocabularies& vocabularies() const { return vocab_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const std::vector<LayerSpec>& layer_specs() const { return specs_; }

  Eigen::Index turn_encoding_dim() const;
  Eigen::Index session_encoding_dim() const;

  /// The session as the model sees it, without the elicitation prompt and
  /// answering turn.
  Session model_view(const Session& session) const;

  /// Turn vector; session is used as given (no elicitation stripping).
  Var encode_turn(Graph& g, const Session& session, std::size_t turn_index) const;
  /// Session vector over the truncation window; throws DataError when empty.
  Var encode_session(Graph& g, const Session& session) const;
  /// Logit of dissatisfaction, including the model view.
  Var logit(Graph& g, const Session& session) const;

  Prediction predict(const Session& session) const;
  double probability(const Session& session) const { return predict(session).p; }

  /// Zeroes the output layer so every prediction is exactly 0.5.
  void zero_output_layer();

  std::uint64_t vocab_hash() const;
  Json header() const;

  void save(const std::filesystem::path& path) const;
  /// Refuses checkpoints with a different format version or vocabulary hash,
  /// or whose parameters do not match the stored configuration.
  static SatisfactionModel load(const std::filesystem::path& path);
  static SatisfactionModel from_checkpoint_bytes(const std::string& bytes);
  std::string to_checkpoint_bytes() const;

 private:
  RowVector turn_numeric(const Session& session, std::size_t index) const;
  RowVector session_numeric(const Session& session) const;
  Var encode_text(Graph& g, const std::string& text, const GruLayer& gru,
                  const AttentionLayer& attention) const;

  ModelKind kind_;
  ModelConfig config_;
  MetaSchema schema_;
  Vocabularies vocab_;
  ParameterSet params_;
  std::vector<LayerSpec> specs_;

  ParamId word_table_;
  GruLayer user_gru_, agent_gru_, session_gru_;
  AttentionLayer user_att_, agent_att_, session_att_;
  std::vector<ParamId> turn_cat_tables_;
  std::vector<ParamId> session_cat_tables_;
  DenseLayer turn_numeric_enc_;
  std::optional<DenseLayer> session_numeric_enc_;
  DenseLayer head1_, head2_, head_out_;
  std::optional<ParamId> turn_scale_;  // 2 x k: mean row, inverse-std row (frozen)
  std::optional<ParamId> session_scale_;
};

}  // namespace satfusion
