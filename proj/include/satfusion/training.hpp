#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "satfusion/predictor.hpp"

namespace satfusion {

/// Deterministic train/validation/test partition of n items.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// 80/10/10 split after a seeded shuffle: floor(0.8 n), floor(0.1 n), rest.
DatasetSplit split_80_10_10(std::size_t n, std::uint64_t seed);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_pr_auc;
};

Json to_json(const EpochLog& entry);

struct TrainingResult {
  SatisfactionModel model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double positive_weight = 1.0;
};

/// Adam with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterSet& params, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);
  void step(ParameterSet& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Rescales all gradients so their global norm is at most max_norm; returns
/// the norm before clipping.
double clip_grad_norm(ParameterSet& params, double max_norm);

/// Mean class-weighted binary cross-entropy of the model over labeled sessions.
double mean_loss(const SatisfactionModel& model, std::span<const Session> sessions,
                 double positive_weight);

/// Trains a model on labeled sessions (label 1 = dissatisfied) with
/// mini-batch Adam, gradient clipping and early stopping on validation
/// PR-AUC; the best epoch's parameters are returned. Throws DataError when a
/// session is unlabeled or the training set holds a single class.
using EpochCallback = std::function<void(const EpochLog&)>;

TrainingResult train(std::span<const Session> train_set, std::span<const Session> validation_set,
                     ModelKind kind, const ModelConfig& config, const MetaSchema& schema,
                     const EpochCallback& on_epoch = {});

}  // namespace satfusion
