#pragma once

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "satfusion/numerics.hpp"

namespace satfusion {

struct ParamId {
  std::size_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// A named trainable (or frozen) array with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

/// Owns every parameter of a model. Names are unique.
class ParameterSet {
 public:
  ParamId add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
              bool trainable = true);

  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }

  ParamId find(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.count(name) == 1; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);
  std::size_t trainable_count() const;

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

/// Handle to a node on a Graph.
struct Var {
  std::size_t id = 0;
};

/// Parameter handles of a single-layer forward GRU:
///   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
///   n = tanh(x Wn + (r * h) Un + bn), h' = z * h + (1 - z) * n.
/// The three gates are packed column-wise in (z, r, n) order.
struct GruLayer {
  ParamId w_input;   // d_in x 3h
  ParamId w_hidden;  // h x 3h
  ParamId bias;      // 1 x 3h
  Eigen::Index input_dim = 0;
  Eigen::Index hidden_dim = 0;
};

/// Additive attention pooling: e_i = v . tanh(h_i W + b), weights = softmax(e).
struct AttentionLayer {
  ParamId projection;  // h x a
  ParamId bias;        // 1 x a
  ParamId context;     // a x 1
  Eigen::Index state_dim = 0;
  Eigen::Index attention_dim = 0;
};

enum class Activation { kNone, kTanh, kRelu };

struct DenseLayer {
  ParamId weight;  // in x out
  ParamId bias;    // 1 x out
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
  Activation activation = Activation::kNone;
};

/// Tape of layer-level operations with hand-derived backward passes.
/// Sequences are stored one time step per row; vectors are 1 x d rows.
/// A graph reads a ParameterSet but never mutates it; gradients stay on the
/// graph until accumulate_into() is called.
class Graph {
 public:
  /// A non-recording graph evaluates forward only and cannot run backward.
  explicit Graph(const ParameterSet& params, bool recording = true);

  Var constant(Matrix value);
  /// A leaf holding a copy of the parameter value; gradient flows back to it.
  Var parameter(ParamId id);

  /// Rows of the table selected by token ids.
  Var embed(ParamId table, std::span<const int> ids);
  Var gru(Var inputs, const GruLayer& layer);
  Var attention_pool(Var states, const AttentionLayer& layer);
  Var dense(Var input, const DenseLayer& layer);
  /// Horizontal concatenation of 1-row inputs.
  Var concat(std::span<const Var> parts);
  /// Vertical stacking of 1-row inputs into a sequence.
  Var stack_rows(std::span<const Var> rows);
  Var sigmoid(Var x);
  Var sum(Var x);
  Var add(Var a, Var b);
  Var scale(Var x, double factor);
  /// Class-weighted binary cross-entropy of a 1x1 logit:
  /// pos_weight * y * softplus(-x) + (1 - y) * softplus(x).
  Var bce_with_logits(Var logit, double label, double pos_weight = 1.0);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;

  /// Reverse sweep from a 1x1 loss. May run once per graph.
  void backward(Var loss);

  /// Gradient of a parameter after backward(); zeros if unreachable.
  Matrix gradient(ParamId id) const;
  /// Gradient with respect to a node value after backward().
  const Matrix& node_gradient(Var v) const { return nodes_.at(v.id).grad; }

  /// Adds this graph's parameter gradients into a destination set.
  void accumulate_into(ParameterSet& target) const;

  /// Drops the tape so the graph can be reused.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Graph&, std::size_t)> backward;
  };

  Var push(Matrix value, std::function<void(Graph&, std::size_t)> backward);
  Matrix& grad_of(std::size_t node);
  Matrix& param_grad(ParamId id);
  const Matrix& param(ParamId id) const { return (*params_)[id].value; }

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  std::vector<Matrix> param_grads_;
  bool recording_ = true;
  bool backward_done_ = false;
};

/// Direct evaluation of the layer math without a tape.
Matrix gru_forward(const Matrix& inputs, const ParameterSet& params, const GruLayer& layer);
RowVector attention_pool_forward(const Matrix& states, const ParameterSet& params,
                                 const AttentionLayer& layer);
Vector attention_weights(const Matrix& states, const ParameterSet& params,
                         const AttentionLayer& layer);
Matrix apply_activation(const Matrix& x, Activation activation);

}  // namespace satfusion
