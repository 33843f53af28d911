#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <concepts>

namespace satfusion {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

template <std::floating_point Scalar>
Scalar logistic(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// log(1 + exp(x)) without overflow.
template <std::floating_point Scalar>
Scalar softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

/// Coefficient-wise logistic; returns an expression.
template <typename Derived>
auto logistic(const Eigen::ArrayBase<Derived>& x) {
  return x.unaryExpr([](typename Derived::Scalar v) { return logistic(v); });
}

template <typename Derived>
auto logistic(const Eigen::MatrixBase<Derived>& x) {
  return satfusion::logistic(x.array()).matrix();
}

/// Softmax over all coefficients with max-subtraction.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime,
              Derived::ColsAtCompileTime>
softmax(const Eigen::MatrixBase<Derived>& scores) {
  const auto shifted = (scores.array() - scores.maxCoeff()).exp().eval();
  return (shifted / shifted.sum()).matrix();
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace satfusion
