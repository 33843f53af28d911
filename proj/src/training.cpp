#include "satfusion/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "satfusion/errors.hpp"
#include "satfusion/metrics.hpp"

namespace satfusion {

DatasetSplit split_80_10_10(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return split;
}

Json to_json(const EpochLog& e) {
  Json j{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
         {"val_pr_auc", nullptr}};
  if (e.val_pr_auc) j["val_pr_auc"] = *e.val_pr_auc;
  return j;
}

AdamOptimizer::AdamOptimizer(const ParameterSet& params, double learning_rate, double beta1,
                             double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const auto& p : params) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void AdamOptimizer::step(ParameterSet& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  std::size_t i = 0;
  for (auto& p : params) {
    if (p.trainable) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
      p.value.array() -=
          lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
    ++i;
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm) params.scale_grad(max_norm / norm);
  return norm;
}

namespace {

struct Evaluation {
  double loss = 0.0;
  std::optional<double> pr_auc;
};

Evaluation evaluate(const SatisfactionModel& model, std::span<const Session> sessions,
                    double positive_weight) {
  Evaluation out;
  if (sessions.empty()) return out;
  std::vector<ScoredLabel> scored;
  scored.reserve(sessions.size());
  bool any_positive = false;
  for (const auto& s : sessions) {
    Graph g(model.params(), /*recording=*/false);
    const Var z = model.logit(g, s);
    const double y = *s.label;
    out.loss += g.scalar(g.bce_with_logits(z, y, positive_weight));
    scored.push_back({logistic(g.scalar(z)), *s.label});
    any_positive = any_positive || *s.label == 1;
  }
  out.loss /= static_cast<double>(sessions.size());
  if (any_positive) out.pr_auc = pr_auc(scored);
  return out;
}

void check_labels(std::span<const Session> sessions, const char* what) {
  for (const auto& s : sessions) {
    if (!s.label) throw DataError(std::string(what) + " session '" + s.session_id + "' has no label");
  }
}

}  // namespace

double mean_loss(const SatisfactionModel& model, std::span<const Session> sessions,
                 double positive_weight) {
  check_labels(sessions, "evaluation");
  return evaluate(model, sessions, positive_weight).loss;
}

TrainingResult train(std::span<const Session> train_set, std::span<const Session> validation_set,
                     ModelKind kind, const ModelConfig& config, const MetaSchema& schema,
                     const EpochCallback& on_epoch) {
  validate(config);
  check_labels(train_set, "training");
  check_labels(validation_set, "validation");
  std::size_t positives = 0;
  for (const auto& s : train_set) positives += *s.label == 1 ? 1 : 0;
  const std::size_t negatives = train_set.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("training set has a single class (" + std::to_string(positives) +
                    " dissatisfied, " + std::to_string(negatives) + " satisfied)");
  }
  const double positive_weight =
      config.class_weight_positive.value_or(static_cast<double>(negatives) /
                                            static_cast<double>(positives));

  TrainingResult result{SatisfactionModel::from_training_data(kind, config, schema, train_set),
                        {}, 0, positive_weight};
  SatisfactionModel& model = result.model;
  ParameterSet best = model.params();
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  AdamOptimizer adam(model.params(), config.learning_rate);
  Rng rng(derive_seed(config.seed, "batches"));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      model.params().zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const Session& s = train_set[order[k]];
        Graph g(model.params());
        const Var loss = g.bce_with_logits(model.logit(g, s), *s.label, positive_weight);
        epoch_loss += g.scalar(loss);
        g.backward(loss);
        g.accumulate_into(model.params());
      }
      model.params().scale_grad(1.0 / static_cast<double>(stop - start));
      clip_grad_norm(model.params(), config.grad_clip);
      adam.step(model.params());
    }
    const Evaluation val = evaluate(model, validation_set, positive_weight);
    result.log.push_back(
        EpochLog{epoch, epoch_loss / static_cast<double>(train_set.size()), val.loss, val.pr_auc});
    if (on_epoch) on_epoch(result.log.back());

    const double score = validation_set.empty() ? static_cast<double>(epoch)
                        : val.pr_auc     ? *val.pr_auc
                                         : -val.loss;
    if (score > best_score) {
      best_score = score;
      best = model.params();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (result.best_epoch > 0) model.params() = best;
  model.params().zero_grad();
  return result;
}

}  // namespace satfusion
