#include "satfusion/predictor.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "satfusion/checkpoint.hpp"
#include "satfusion/errors.hpp"

namespace satfusion {

namespace {

constexpr Eigen::Index kDerivedTurnFeatures = 2;  // is-target indicator, offset from target

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

std::vector<std::string> sorted_values(const std::set<std::string>& values) {
  return {values.begin(), values.end()};
}

Json vocab_json(const std::map<std::string, CategoryVocabulary>& vocabs) {
  Json j = Json::object();
  for (const auto& [name, v] : vocabs) j[name] = v.values();
  return j;
}

std::map<std::string, CategoryVocabulary> vocab_from_json(const Json& j) {
  std::map<std::string, CategoryVocabulary> out;
  for (const auto& item : j.items()) {
    out.emplace(item.key(), CategoryVocabulary(item.value().get<std::vector<std::string>>()));
  }
  return out;
}

// Mean / inverse standard deviation per feature; constant features get 1.
Matrix scaling_rows(const std::vector<std::vector<double>>& columns) {
  Matrix out(2, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& col = columns[k];
    double mean = 0.0;
    for (double v : col) mean += v;
    mean = col.empty() ? 0.0 : mean / static_cast<double>(col.size());
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    var = col.empty() ? 0.0 : var / static_cast<double>(col.size());
    const auto c = static_cast<Eigen::Index>(k);
    out(0, c) = mean;
    out(1, c) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return out;
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kFeedback ? "FP" : "HP"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "FP" || name == "fp") return ModelKind::kFeedback;
  if (name == "HP" || name == "hp") return ModelKind::kFallback;
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected fp or hp)");
}

void validate(const ModelConfig& c) {
  auto positive = [](Eigen::Index v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
  };
  positive(c.d_emb, "d_emb");
  positive(c.d_turn_gru, "d_turn_gru");
  positive(c.d_session_gru, "d_session_gru");
  positive(c.dense_sizes[0], "dense_sizes[0]");
  positive(c.dense_sizes[1], "dense_sizes[1]");
  positive(c.categorical_dim, "categorical_dim");
  positive(c.numeric_dim, "numeric_dim");
  if (c.vocab_min_freq == 0) throw ConfigError("model config: vocab_min_freq must be positive");
  if (c.max_turns == 0) throw ConfigError("model config: max_turns must be positive");
  if (c.max_tokens == 0) throw ConfigError("model config: max_tokens must be positive");
  if (c.batch_size == 0) throw ConfigError("model config: batch_size must be positive");
  if (c.class_weight_positive && !(*c.class_weight_positive > 0.0)) {
    throw ConfigError("model config: class_weight_positive must be positive");
  }
  if (!(c.learning_rate > 0.0)) throw ConfigError("model config: learning_rate must be positive");
  if (!(c.grad_clip > 0.0)) throw ConfigError("model config: grad_clip must be positive");
}

Json to_json(const ModelConfig& c) {
  Json j{{"d_emb", c.d_emb},
         {"d_turn_gru", c.d_turn_gru},
         {"d_session_gru", c.d_session_gru},
         {"dense_sizes", {c.dense_sizes[0], c.dense_sizes[1]}},
         {"categorical_dim", c.categorical_dim},
         {"numeric_dim", c.numeric_dim},
         {"head_activation", std::string(to_string(c.head_activation))},
         {"numeric_activation", std::string(to_string(c.numeric_activation))},
         {"vocab_min_freq", c.vocab_min_freq},
         {"max_turns", c.max_turns},
         {"max_tokens", c.max_tokens},
         {"class_weight_positive", nullptr},
         {"learning_rate", c.learning_rate},
         {"grad_clip", c.grad_clip},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"patience", c.patience},
         {"seed", c.seed}};
  if (c.class_weight_positive) j["class_weight_positive"] = *c.class_weight_positive;
  return j;
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  try {
    c.d_emb = j.at("d_emb").get<Eigen::Index>();
    c.d_turn_gru = j.at("d_turn_gru").get<Eigen::Index>();
    c.d_session_gru = j.at("d_session_gru").get<Eigen::Index>();
    c.dense_sizes = {j.at("dense_sizes").at(0).get<Eigen::Index>(),
                     j.at("dense_sizes").at(1).get<Eigen::Index>()};
    c.categorical_dim = j.at("categorical_dim").get<Eigen::Index>();
    c.numeric_dim = j.at("numeric_dim").get<Eigen::Index>();
    c.head_activation = parse_activation(j.at("head_activation").get<std::string>());
    c.numeric_activation = parse_activation(j.at("numeric_activation").get<std::string>());
    c.vocab_min_freq = j.at("vocab_min_freq").get<std::size_t>();
    c.max_turns = j.at("max_turns").get<std::size_t>();
    c.max_tokens = j.at("max_tokens").get<std::size_t>();
    if (!j.at("class_weight_positive").is_null()) {
      c.class_weight_positive = j.at("class_weight_positive").get<double>();
    }
    c.learning_rate = j.at("learning_rate").get<double>();
    c.grad_clip = j.at("grad_clip").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.patience = j.at("patience").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  validate(c);
  return c;
}

std::pair<std::size_t, std::size_t> turn_window(std::size_t turn_count, std::size_t target,
                                                std::size_t max_turns) {
  std::size_t lo = target;
  std::size_t hi = target + 1;
  bool after = true;
  while (hi - lo < max_turns && (lo > 0 || hi < turn_count)) {
    if (after && hi < turn_count) {
      ++hi;
    } else if (!after && lo > 0) {
      --lo;
    } else if (hi < turn_count) {
      ++hi;
    } else {
      --lo;
    }
    after = !after;
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------

SatisfactionModel::SatisfactionModel(ModelKind kind, ModelConfig config, MetaSchema schema,
                                     Vocabularies vocab)
    : kind_(kind), config_(std::move(config)), schema_(std::move(schema)), vocab_(std::move(vocab)) {
  validate(config_);
  for (const auto& name : schema_.turn_categorical) vocab_.turn_categorical.try_emplace(name);
  for (const auto& name : schema_.session_categorical) vocab_.session_categorical.try_emplace(name);

  Rng rng(derive_seed(config_.seed, "init"));
  const auto v = static_cast<Eigen::Index>(vocab_.tokens.size());
  word_table_ = make_embedding(params_, specs_, "word", v, config_.d_emb, rng);
  user_gru_ = make_gru(params_, specs_, "user.gru", config_.d_emb, config_.d_turn_gru, rng);
  user_att_ = make_attention(params_, specs_, "user.attention", config_.d_turn_gru,
                             config_.d_turn_gru, rng);
  agent_gru_ = make_gru(params_, specs_, "agent.gru", config_.d_emb, config_.d_turn_gru, rng);
  agent_att_ = make_attention(params_, specs_, "agent.attention", config_.d_turn_gru,
                              config_.d_turn_gru, rng);
  for (const auto& name : schema_.turn_categorical) {
    const auto n = static_cast<Eigen::Index>(std::max<std::size_t>(2, vocab_.turn_categorical[name].size()));
    turn_cat_tables_.push_back(
        make_embedding(params_, specs_, "turn.cat." + name, n, config_.categorical_dim, rng));
  }
  const auto turn_num = static_cast<Eigen::Index>(schema_.turn_numerical.size());
  if (turn_num > 0) turn_scale_ = params_.add("turn.num.scale", 2, turn_num, false);
  if (turn_scale_) params_[*turn_scale_].value.row(1).setOnes();
  turn_numeric_enc_ = make_dense(params_, specs_, "turn.num", turn_num + kDerivedTurnFeatures,
                                 config_.numeric_dim, config_.numeric_activation, rng);
  specs_.push_back(LayerSpec{"turn.concat", LayerKind::kConcat, turn_encoding_dim(),
                             turn_encoding_dim(), Activation::kNone});

  session_gru_ = make_gru(params_, specs_, "session.gru", turn_encoding_dim(),
                          config_.d_session_gru, rng);
  session_att_ = make_attention(params_, specs_, "session.attention", config_.d_session_gru,
                                config_.d_session_gru, rng);
  for (const auto& name : schema_.session_categorical) {
    const auto n =
        static_cast<Eigen::Index>(std::max<std::size_t>(2, vocab_.session_categorical[name].size()));
    session_cat_tables_.push_back(
        make_embedding(params_, specs_, "session.cat." + name, n, config_.categorical_dim, rng));
  }
  const auto session_num = static_cast<Eigen::Index>(schema_.session_numerical.size());
  if (session_num > 0) {
    session_scale_ = params_.add("session.num.scale", 2, session_num, false);
    params_[*session_scale_].value.row(1).setOnes();
    session_numeric_enc_ = make_dense(params_, specs_, "session.num", session_num,
                                      config_.numeric_dim, config_.numeric_activation, rng);
  }
  specs_.push_back(LayerSpec{"session.concat", LayerKind::kConcat, session_encoding_dim(),
                             session_encoding_dim(), Activation::kNone});

  // Raw scaled session numerics join the head input directly (the wide path).
  const Eigen::Index head_in = session_encoding_dim() + session_num;
  head1_ = make_dense(params_, specs_, "head.1", head_in, config_.dense_sizes[0],
                      config_.head_activation, rng);
  head2_ = make_dense(params_, specs_, "head.2", config_.dense_sizes[0], config_.dense_sizes[1],
                      config_.head_activation, rng);
  head_out_ = make_dense(params_, specs_, "head.out", config_.dense_sizes[1], 1, Activation::kNone,
                         rng);
  specs_.push_back(LayerSpec{"head.sigmoid", LayerKind::kSigmoid, 1, 1, Activation::kNone});
}

SatisfactionModel SatisfactionModel::from_training_data(ModelKind kind, const ModelConfig& config,
                                                        const MetaSchema& schema,
                                                        std::span<const Session> sessions) {
  std::map<std::string, std::size_t> counts;
  std::map<std::string, std::set<std::string>> turn_values, session_values;
  std::vector<std::vector<double>> turn_columns(schema.turn_numerical.size());
  std::vector<std::vector<double>> session_columns(schema.session_numerical.size());

  for (const auto& raw : sessions) {
    const Session s = strip_elicitation(raw);
    for (const auto& turn : s.turns) {
      for (const auto& t : tokenize(turn.user_text)) ++counts[t];
      for (const auto& t : tokenize(turn.agent_text)) ++counts[t];
      for (const auto& name : schema.turn_categorical) {
        if (auto it = turn.meta_categorical.find(name); it != turn.meta_categorical.end()) {
          turn_values[name].insert(it->second);
        }
      }
      for (std::size_t k = 0; k < schema.turn_numerical.size(); ++k) {
        if (auto it = turn.meta_numerical.find(schema.turn_numerical[k]);
            it != turn.meta_numerical.end()) {
          turn_columns[k].push_back(it->second);
        }
      }
    }
    for (const auto& name : schema.session_categorical) {
      if (auto it = s.session_categorical.find(name); it != s.session_categorical.end()) {
        session_values[name].insert(it->second);
      }
    }
    for (std::size_t k = 0; k < schema.session_numerical.size(); ++k) {
      if (auto it = s.session_numerical.find(schema.session_numerical[k]);
          it != s.session_numerical.end()) {
        session_columns[k].push_back(it->second);
      }
    }
  }

  Vocabularies vocab;
  vocab.tokens = Vocabulary::build(counts, config.vocab_min_freq);
  for (const auto& name : schema.turn_categorical) {
    vocab.turn_categorical.emplace(name, CategoryVocabulary(sorted_values(turn_values[name])));
  }
  for (const auto& name : schema.session_categorical) {
    vocab.session_categorical.emplace(name,
                                      CategoryVocabulary(sorted_values(session_values[name])));
  }
  SatisfactionModel model(kind, config, schema, std::move(vocab));
  if (model.turn_scale_) model.params_[*model.turn_scale_].value = scaling_rows(turn_columns);
  if (model.session_scale_) {
    model.params_[*model.session_scale_].value = scaling_rows(session_columns);
  }
  return model;
}

Eigen::Index SatisfactionModel::turn_encoding_dim() const {
  return 2 * config_.d_turn_gru +
         static_cast<Eigen::Index>(schema_.turn_categorical.size()) * config_.categorical_dim +
         config_.numeric_dim;
}

Eigen::Index SatisfactionModel::session_encoding_dim() const {
  return config_.d_session_gru +
         static_cast<Eigen::Index>(schema_.session_categorical.size()) * config_.categorical_dim +
         (schema_.session_numerical.empty() ? 0 : config_.numeric_dim);
}

Session SatisfactionModel::model_view(const Session& session) const {
  // Both models skip the prompt and answer: the answer would leak the label.
  return strip_elicitation(session);
}

RowVector SatisfactionModel::turn_numeric(const Session& session, std::size_t index) const {
  const Turn& turn = session.turns[index];
  const auto k = static_cast<Eigen::Index>(schema_.turn_numerical.size());
  RowVector out(k + kDerivedTurnFeatures);
  for (Eigen::Index i = 0; i < k; ++i) {
    auto it = turn.meta_numerical.find(schema_.turn_numerical[static_cast<std::size_t>(i)]);
    const double raw = it == turn.meta_numerical.end() ? 0.0 : it->second;
    const Matrix& scale = params_[*turn_scale_].value;
    out(i) = it == turn.meta_numerical.end() ? 0.0 : (raw - scale(0, i)) * scale(1, i);
  }
  out(k) = index == session.target_index ? 1.0 : 0.0;
  out(k + 1) = (static_cast<double>(index) - static_cast<double>(session.target_index)) /
               static_cast<double>(config_.max_turns);
  return out;
}

RowVector SatisfactionModel::session_numeric(const Session& session) const {
  const auto k = static_cast<Eigen::Index>(schema_.session_numerical.size());
  RowVector out(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    auto it = session.session_numerical.find(schema_.session_numerical[static_cast<std::size_t>(i)]);
    const Matrix& scale = params_[*session_scale_].value;
    out(i) = it == session.session_numerical.end() ? 0.0 : (it->second - scale(0, i)) * scale(1, i);
  }
  return out;
}

Var SatisfactionModel::encode_text(Graph& g, const std::string& text, const GruLayer& gru,
                                   const AttentionLayer& attention) const {
  const std::vector<int> ids = vocab_.tokens.encode(text, config_.max_tokens);
  const Var embedded = g.embed(word_table_, ids);
  return g.attention_pool(g.gru(embedded, gru), attention);
}

Var SatisfactionModel::encode_turn(Graph& g, const Session& session, std::size_t index) const {
  if (index >= session.turns.size()) throw DataError("encode_turn: turn index out of range");
  const Turn& turn = session.turns[index];
  std::vector<Var> parts;
  parts.reserve(3 + turn_cat_tables_.size());
  parts.push_back(encode_text(g, turn.user_text, user_gru_, user_att_));
  parts.push_back(encode_text(g, turn.agent_text, agent_gru_, agent_att_));
  for (std::size_t k = 0; k < schema_.turn_categorical.size(); ++k) {
    const auto& name = schema_.turn_categorical[k];
    auto it = turn.meta_categorical.find(name);
    const int id = it == turn.meta_categorical.end() ? 0 : vocab_.turn_categorical.at(name).id(it->second);
    const int ids[1] = {id};
    parts.push_back(g.embed(turn_cat_tables_[k], ids));
  }
  parts.push_back(g.dense(g.constant(turn_numeric(session, index)), turn_numeric_enc_));
  return g.concat(parts);
}

Var SatisfactionModel::encode_session(Graph& g, const Session& session) const {
  if (session.turns.empty()) throw DataError("encode_session: session '" + session.session_id + "' is empty");
  if (session.target_index >= session.turns.size()) {
    throw DataError("encode_session: target_index out of range");
  }
  const auto [lo, hi] = turn_window(session.turns.size(), session.target_index, config_.max_turns);
  std::vector<Var> turns;
  turns.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) turns.push_back(encode_turn(g, session, i));
  std::vector<Var> parts;
  parts.push_back(g.attention_pool(g.gru(g.stack_rows(turns), session_gru_), session_att_));
  for (std::size_t k = 0; k < schema_.session_categorical.size(); ++k) {
    const auto& name = schema_.session_categorical[k];
    auto it = session.session_categorical.find(name);
    const int id =
        it == session.session_categorical.end() ? 0 : vocab_.session_categorical.at(name).id(it->second);
    const int ids[1] = {id};
    parts.push_back(g.embed(session_cat_tables_[k], ids));
  }
  if (session_numeric_enc_) {
    parts.push_back(g.dense(g.constant(session_numeric(session)), *session_numeric_enc_));
  }
  return g.concat(parts);
}

Var SatisfactionModel::logit(Graph& g, const Session& session) const {
  const Session view = model_view(session);
  const Var encoded = encode_session(g, view);
  Var head_in = encoded;
  if (session_numeric_enc_) {
    const Var wide = g.constant(session_numeric(view));
    const Var parts[2] = {encoded, wide};
    head_in = g.concat(parts);
  }
  return g.dense(g.dense(g.dense(head_in, head1_), head2_), head_out_);
}

Prediction SatisfactionModel::predict(const Session& session) const {
  Graph g(params_, /*recording=*/false);
  const double z = g.scalar(logit(g, session));
  return Prediction{logistic(z), session.session_id};
}

void SatisfactionModel::zero_output_layer() {
  params_[head_out_.weight].value.setZero();
  params_[head_out_.bias].value.setZero();
}

std::uint64_t SatisfactionModel::vocab_hash() const {
  std::uint64_t h = vocab_.tokens.hash();
  for (const auto* group : {&vocab_.turn_categorical, &vocab_.session_categorical}) {
    for (const auto& [name, v] : *group) {
      h = fnv1a(name, h);
      for (const auto& value : v.values()) h = fnv1a(value, fnv1a("\x1f", h));
    }
    h = fnv1a("\x1e", h);
  }
  return h;
}

Json SatisfactionModel::header() const {
  Json specs = Json::array();
  for (const auto& s : specs_) {
    specs.push_back({{"name", s.name},
                     {"kind", std::string(to_string(s.kind))},
                     {"input_dim", s.input_dim},
                     {"output_dim", s.output_dim},
                     {"activation", std::string(to_string(s.activation))}});
  }
  return Json{{"format_version", kCheckpointFormatVersion},
              {"kind", std::string(to_string(kind_))},
              {"config", to_json(config_)},
              {"schema", to_json(schema_)},
              {"layers", specs},
              {"vocab", vocab_.tokens.tokens()},
              {"turn_categorical_vocab", vocab_json(vocab_.turn_categorical)},
              {"session_categorical_vocab", vocab_json(vocab_.session_categorical)},
              {"vocab_hash", hex(vocab_hash())}};
}

std::string SatisfactionModel::to_checkpoint_bytes() const {
  return serialize_checkpoint(header(), params_);
}

void SatisfactionModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, header(), params_);
}

SatisfactionModel SatisfactionModel::from_checkpoint_bytes(const std::string& bytes) {
  Checkpoint ck = deserialize_checkpoint(bytes);
  const Json& h = ck.header;
  Vocabularies vocab;
  ModelKind kind;
  ModelConfig config;
  MetaSchema schema;
  std::string stored_hash;
  try {
    if (h.at("format_version").get<std::uint32_t>() != kCheckpointFormatVersion) {
      throw IoError("checkpoint header declares an unsupported format version");
    }
    kind = parse_model_kind(h.at("kind").get<std::string>());
    config = model_config_from_json(h.at("config"));
    schema = schema_from_json(h.at("schema"));
    vocab.tokens = Vocabulary::from_tokens(h.at("vocab").get<std::vector<std::string>>());
    vocab.turn_categorical = vocab_from_json(h.at("turn_categorical_vocab"));
    vocab.session_categorical = vocab_from_json(h.at("session_categorical_vocab"));
    stored_hash = h.at("vocab_hash").get<std::string>();
  } catch (const Json::exception& e) {
    throw IoError(std::string("corrupted checkpoint header: ") + e.what());
  } catch (const DataError& e) {
    throw IoError(std::string("corrupted checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("corrupted checkpoint header: ") + e.what());
  }
  SatisfactionModel model(kind, config, schema, std::move(vocab));
  if (hex(model.vocab_hash()) != stored_hash) {
    throw IoError("checkpoint vocabulary hash mismatch (stored " + stored_hash + ", computed " +
                  hex(model.vocab_hash()) + ")");
  }
  if (ck.params.size() != model.params_.size()) {
    throw IoError("checkpoint parameter count does not match its configuration");
  }
  for (auto& p : model.params_) {
    if (!ck.params.contains(p.name)) throw IoError("checkpoint lacks parameter '" + p.name + "'");
    const Parameter& stored = ck.params[ck.params.find(p.name)];
    if (stored.value.rows() != p.value.rows() || stored.value.cols() != p.value.cols()) {
      throw IoError("checkpoint parameter '" + p.name + "' has the wrong shape");
    }
    p.value = stored.value;
    p.trainable = stored.trainable;
  }
  return model;
}

SatisfactionModel SatisfactionModel::load(const std::filesystem::path& path) {
  return from_checkpoint_bytes(read_file(path));
}

}  // namespace satfusion
