#include "satfusion/autodiff.hpp"

#include <cmath>
#include <sstream>

#include "satfusion/errors.hpp"

namespace satfusion {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream s;
  s << m.rows() << "x" << m.cols();
  return s.str();
}

void require_finite(const Matrix& m, const char* op) {
  if (!m.allFinite()) throw DataError(std::string(op) + ": non-finite input");
}

// Activation derivative expressed through the activated output.
Matrix activation_grad(const Matrix& output, const Matrix& upstream, Activation activation) {
  switch (activation) {
    case Activation::kNone:
      return upstream;
    case Activation::kTanh:
      return (upstream.array() * (1.0 - output.array().square())).matrix();
    case Activation::kRelu:
      return (upstream.array() * (output.array() > 0.0).cast<double>()).matrix();
  }
  return upstream;
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

ParamId ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                          bool trainable) {
  if (rows <= 0 || cols <= 0) {
    throw ShapeError("parameter '" + name + "' must have positive dimensions");
  }
  if (by_name_.count(name) != 0) throw UsageError("duplicate parameter name '" + name + "'");
  by_name_.emplace(name, params_.size());
  params_.push_back(Parameter{name, Matrix::Zero(rows, cols), Matrix::Zero(rows, cols), trainable});
  return ParamId{params_.size() - 1};
}

ParamId ParameterSet::find(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw UsageError("no parameter named '" + name + "'");
  return ParamId{it->second};
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p.trainable) sq += p.grad.squaredNorm();
  }
  return std::sqrt(sq);
}

void ParameterSet::scale_grad(double factor) {
  for (auto& p : params_) p.grad *= factor;
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

// ---------------------------------------------------------------------------
// Direct layer evaluation

Matrix apply_activation(const Matrix& x, Activation activation) {
  switch (activation) {
    case Activation::kNone:
      return x;
    case Activation::kTanh:
      return x.array().tanh().matrix();
    case Activation::kRelu:
      return x.cwiseMax(0.0);
  }
  return x;
}

namespace {

struct GruTrace {
  Matrix states;  // len x h
  Matrix update;  // z
  Matrix reset;   // r
  Matrix candidate;  // n
};

GruTrace run_gru(const Matrix& x, const Matrix& w, const Matrix& u, const Matrix& b) {
  const Eigen::Index len = x.rows();
  const Eigen::Index h = u.rows();
  Matrix gates = x * w;
  gates.rowwise() += b.row(0);
  GruTrace tr{Matrix(len, h), Matrix(len, h), Matrix(len, h), Matrix(len, h)};
  RowVector prev = RowVector::Zero(h);
  RowVector zr(2 * h);
  RowVector cand(h);
  for (Eigen::Index t = 0; t < len; ++t) {
    zr.noalias() = gates.row(t).head(2 * h);
    zr.noalias() += prev * u.leftCols(2 * h);
    zr = satfusion::logistic(zr.array()).matrix();
    const auto z = zr.head(h);
    const auto r = zr.tail(h);
    cand.noalias() = gates.row(t).tail(h);
    cand.noalias() += (r.array() * prev.array()).matrix() * u.rightCols(h);
    cand = cand.array().tanh().matrix();
    tr.update.row(t) = z;
    tr.reset.row(t) = r;
    tr.candidate.row(t) = cand;
    prev = (z.array() * prev.array() + (1.0 - z.array()) * cand.array()).matrix();
    tr.states.row(t) = prev;
  }
  return tr;
}

}  // namespace

Matrix gru_forward(const Matrix& inputs, const ParameterSet& params, const GruLayer& layer) {
  if (inputs.rows() < 1) throw ShapeError("gru: sequence must have at least one step");
  if (inputs.cols() != layer.input_dim) {
    throw ShapeError("gru: input is " + shape_str(inputs) + ", layer expects width " +
                     std::to_string(layer.input_dim));
  }
  require_finite(inputs, "gru");
  return run_gru(inputs, params[layer.w_input].value, params[layer.w_hidden].value,
                 params[layer.bias].value)
      .states;
}

Vector attention_weights(const Matrix& states, const ParameterSet& params,
                         const AttentionLayer& layer) {
  Matrix act = states * params[layer.projection].value;
  act.rowwise() += params[layer.bias].value.row(0);
  act = act.array().tanh().matrix();
  const Vector scores = act * params[layer.context].value;
  return softmax(scores);
}

RowVector attention_pool_forward(const Matrix& states, const ParameterSet& params,
                                 const AttentionLayer& layer) {
  if (states.rows() < 1) throw ShapeError("attention_pool: need at least one state");
  require_finite(states, "attention_pool");
  return attention_weights(states, params, layer).transpose() * states;
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph(const ParameterSet& params, bool recording)
    : params_(&params), param_grads_(params.size()), recording_(recording) {}

Var Graph::push(Matrix value, std::function<void(Graph&, std::size_t)> backward) {
  if (!recording_) backward = nullptr;
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward)});
  return Var{nodes_.size() - 1};
}

Matrix& Graph::grad_of(std::size_t node) {
  Node& n = nodes_[node];
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix& Graph::param_grad(ParamId id) {
  Matrix& g = param_grads_.at(id.index);
  if (g.size() == 0) {
    const Matrix& v = param(id);
    g.setZero(v.rows(), v.cols());
  }
  return g;
}

double Graph::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw ShapeError("expected a scalar, got " + shape_str(m));
  return m(0, 0);
}

Var Graph::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Graph::parameter(ParamId id) {
  return push(param(id), [id](Graph& g, std::size_t self) {
    g.param_grad(id) += g.nodes_[self].grad;
  });
}

Var Graph::embed(ParamId table, std::span<const int> ids) {
  const Matrix& t = param(table);
  Matrix out(static_cast<Eigen::Index>(ids.size()), t.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= t.rows()) {
      throw DataError("embed: token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                      std::to_string(t.rows()));
    }
    out.row(static_cast<Eigen::Index>(i)) = t.row(ids[i]);
  }
  std::vector<int> kept(ids.begin(), ids.end());
  return push(std::move(out), [table, kept = std::move(kept)](Graph& g, std::size_t self) {
    const Matrix& up = g.nodes_[self].grad;
    Matrix& gt = g.param_grad(table);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      gt.row(kept[i]) += up.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var Graph::gru(Var inputs, const GruLayer& layer) {
  const Matrix& x = value(inputs);
  if (x.rows() < 1) throw ShapeError("gru: sequence must have at least one step");
  if (x.cols() != layer.input_dim) {
    throw ShapeError("gru: input is " + shape_str(x) + ", layer expects width " +
                     std::to_string(layer.input_dim));
  }
  require_finite(x, "gru");
  GruTrace trace =
      run_gru(x, param(layer.w_input), param(layer.w_hidden), param(layer.bias));
  Matrix states = trace.states;
  const std::size_t in = inputs.id;
  return push(std::move(states), [in, layer, trace = std::move(trace)](Graph& g,
                                                                       std::size_t self) {
    const Matrix& up = g.nodes_[self].grad;
    const Matrix& x = g.nodes_[in].value;
    const Matrix& w = g.param(layer.w_input);
    const Matrix& u = g.param(layer.w_hidden);
    const Eigen::Index len = x.rows();
    const Eigen::Index h = layer.hidden_dim;

    Matrix d_gates(len, 3 * h);
    Matrix& du = g.param_grad(layer.w_hidden);
    RowVector carry = RowVector::Zero(h);
    RowVector d_zr(2 * h);
    RowVector d_cand(h);
    RowVector d_rh(h);
    for (Eigen::Index t = len - 1; t >= 0; --t) {
      const RowVector prev = t > 0 ? RowVector(trace.states.row(t - 1)) : RowVector::Zero(h);
      const auto z = trace.update.row(t).array();
      const auto r = trace.reset.row(t).array();
      const auto n = trace.candidate.row(t).array();
      const RowVector dh = up.row(t) + carry;

      // h = z*prev + (1-z)*n
      d_cand = (dh.array() * (1.0 - z) * (1.0 - n.square())).matrix();
      const RowVector rh = (r * prev.array()).matrix();
      du.rightCols(h).noalias() += rh.transpose() * d_cand;
      d_rh.noalias() = d_cand * u.rightCols(h).transpose();
      d_zr.head(h) = (dh.array() * (prev.array() - n) * z * (1.0 - z)).matrix();
      d_zr.tail(h) = (d_rh.array() * prev.array() * r * (1.0 - r)).matrix();
      du.leftCols(2 * h).noalias() += prev.transpose() * d_zr;

      carry = (dh.array() * z + d_rh.array() * r).matrix();
      carry.noalias() += d_zr * u.leftCols(2 * h).transpose();

      d_gates.row(t).head(2 * h) = d_zr;
      d_gates.row(t).tail(h) = d_cand;
    }
    g.param_grad(layer.w_input).noalias() += x.transpose() * d_gates;
    g.param_grad(layer.bias) += d_gates.colwise().sum();
    if (g.nodes_[in].backward) g.grad_of(in).noalias() += d_gates * w.transpose();
  });
}

Var Graph::attention_pool(Var states, const AttentionLayer& layer) {
  const Matrix& hs = value(states);
  if (hs.rows() < 1) throw ShapeError("attention_pool: need at least one state");
  if (hs.cols() != layer.state_dim) {
    throw ShapeError("attention_pool: states are " + shape_str(hs) + ", layer expects width " +
                     std::to_string(layer.state_dim));
  }
  require_finite(hs, "attention_pool");
  Matrix act = hs * param(layer.projection);
  act.rowwise() += param(layer.bias).row(0);
  act = act.array().tanh().matrix();
  Vector weights = softmax(Vector(act * param(layer.context)));
  Matrix out = weights.transpose() * hs;
  const std::size_t in = states.id;
  return push(std::move(out), [in, layer, act = std::move(act), weights = std::move(weights)](
                                  Graph& g, std::size_t self) {
    const RowVector up = g.nodes_[self].grad.row(0);
    const Matrix& hs = g.nodes_[in].value;
    const Vector d_weights = hs * up.transpose();
    const double mean = weights.dot(d_weights);
    const Vector d_scores = (weights.array() * (d_weights.array() - mean)).matrix();
    g.param_grad(layer.context).noalias() += act.transpose() * d_scores;
    const Matrix d_pre =
        ((d_scores * g.param(layer.context).transpose()).array() * (1.0 - act.array().square()))
            .matrix();
    g.param_grad(layer.projection).noalias() += hs.transpose() * d_pre;
    g.param_grad(layer.bias) += d_pre.colwise().sum();
    if (g.nodes_[in].backward) {
      Matrix& dh = g.grad_of(in);
      dh.noalias() += weights * up;
      dh.noalias() += d_pre * g.param(layer.projection).transpose();
    }
  });
}

Var Graph::dense(Var input, const DenseLayer& layer) {
  const Matrix& x = value(input);
  if (x.cols() != layer.input_dim) {
    throw ShapeError("dense: input is " + shape_str(x) + ", weight is " +
                     shape_str(param(layer.weight)));
  }
  Matrix pre = x * param(layer.weight);
  pre.rowwise() += param(layer.bias).row(0);
  Matrix out = apply_activation(pre, layer.activation);
  const std::size_t in = input.id;
  return push(std::move(out), [in, layer](Graph& g, std::size_t self) {
    const Matrix d_pre =
        activation_grad(g.nodes_[self].value, g.nodes_[self].grad, layer.activation);
    g.param_grad(layer.weight).noalias() += g.nodes_[in].value.transpose() * d_pre;
    g.param_grad(layer.bias) += d_pre.colwise().sum();
    if (g.nodes_[in].backward) {
      g.grad_of(in).noalias() += d_pre * g.param(layer.weight).transpose();
    }
  });
}

Var Graph::concat(std::span<const Var> parts) {
  Eigen::Index width = 0;
  for (Var p : parts) {
    if (value(p).rows() != 1) throw ShapeError("concat: inputs must be single rows, got " +
                                               shape_str(value(p)));
    width += value(p).cols();
  }
  Matrix out(1, width);
  Eigen::Index offset = 0;
  std::vector<std::size_t> ids;
  for (Var p : parts) {
    out.block(0, offset, 1, value(p).cols()) = value(p);
    offset += value(p).cols();
    ids.push_back(p.id);
  }
  return push(std::move(out), [ids = std::move(ids)](Graph& g, std::size_t self) {
    Eigen::Index offset = 0;
    for (std::size_t id : ids) {
      const Eigen::Index w = g.nodes_[id].value.cols();
      if (g.nodes_[id].backward) g.grad_of(id) += g.nodes_[self].grad.block(0, offset, 1, w);
      offset += w;
    }
  });
}

Var Graph::stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const Eigen::Index width = value(rows[0]).cols();
  Matrix out(static_cast<Eigen::Index>(rows.size()), width);
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Matrix& r = value(rows[i]);
    if (r.rows() != 1 || r.cols() != width) {
      throw ShapeError("stack_rows: row " + std::to_string(i) + " is " + shape_str(r) +
                       ", expected 1x" + std::to_string(width));
    }
    out.row(static_cast<Eigen::Index>(i)) = r;
    ids.push_back(rows[i].id);
  }
  return push(std::move(out), [ids = std::move(ids)](Graph& g, std::size_t self) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (g.nodes_[ids[i]].backward) {
        g.grad_of(ids[i]) += g.nodes_[self].grad.row(static_cast<Eigen::Index>(i));
      }
    }
  });
}

Var Graph::sigmoid(Var x) {
  Matrix out = satfusion::logistic(value(x));
  const std::size_t in = x.id;
  return push(std::move(out), [in](Graph& g, std::size_t self) {
    if (!g.nodes_[in].backward) return;
    const auto& y = g.nodes_[self].value.array();
    g.grad_of(in) += (g.nodes_[self].grad.array() * y * (1.0 - y)).matrix();
  });
}

Var Graph::sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = value(x).sum();
  const std::size_t in = x.id;
  return push(std::move(out), [in](Graph& g, std::size_t self) {
    if (!g.nodes_[in].backward) return;
    g.grad_of(in).array() += g.nodes_[self].grad(0, 0);
  });
}

Var Graph::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols()) {
    throw ShapeError("add: " + shape_str(value(a)) + " vs " + shape_str(value(b)));
  }
  Matrix out = value(a) + value(b);
  const std::size_t ia = a.id;
  const std::size_t ib = b.id;
  return push(std::move(out), [ia, ib](Graph& g, std::size_t self) {
    if (g.nodes_[ia].backward) g.grad_of(ia) += g.nodes_[self].grad;
    if (g.nodes_[ib].backward) g.grad_of(ib) += g.nodes_[self].grad;
  });
}

Var Graph::scale(Var x, double factor) {
  Matrix out = value(x) * factor;
  const std::size_t in = x.id;
  return push(std::move(out), [in, factor](Graph& g, std::size_t self) {
    if (g.nodes_[in].backward) g.grad_of(in) += g.nodes_[self].grad * factor;
  });
}

Var Graph::bce_with_logits(Var logit, double label, double pos_weight) {
  const double x = scalar(logit);
  Matrix out(1, 1);
  out(0, 0) = pos_weight * label * softplus(-x) + (1.0 - label) * softplus(x);
  const std::size_t in = logit.id;
  return push(std::move(out), [in, x, label, pos_weight](Graph& g, std::size_t self) {
    if (!g.nodes_[in].backward) return;
    const double s = satfusion::logistic(x);
    const double d = pos_weight * label * (s - 1.0) + (1.0 - label) * s;
    g.grad_of(in)(0, 0) += g.nodes_[self].grad(0, 0) * d;
  });
}

void Graph::backward(Var loss) {
  if (backward_done_) {
    throw UsageError("backward called twice on the same graph without reset()");
  }
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got " + shape_str(value(loss)));
  }
  if (!recording_) throw UsageError("backward on a non-recording graph");
  backward_done_ = true;
  grad_of(loss.id)(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
}

Matrix Graph::gradient(ParamId id) const {
  const Matrix& g = param_grads_.at(id.index);
  if (g.size() != 0) return g;
  const Matrix& v = (*params_)[id].value;
  return Matrix::Zero(v.rows(), v.cols());
}

void Graph::accumulate_into(ParameterSet& target) const {
  for (std::size_t i = 0; i < param_grads_.size(); ++i) {
    if (param_grads_[i].size() != 0) target[ParamId{i}].grad += param_grads_[i];
  }
}

void Graph::reset() {
  nodes_.clear();
  for (auto& g : param_grads_) g.resize(0, 0);
  backward_done_ = false;
}

}  // namespace satfusion
