#pragma once

#include <cmath>
#include <numbers>

#include "spectttra/tensor.hpp"

namespace spectttra::detail {

// Exact (erf) GELU.
template <typename Real>
Real gelu(Real x) {
  return Real(0.5) * x * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
}

template <typename Real>
Real gelu_grad(Real x) {
  const Real cdf = Real(0.5) * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
  const Real pdf = std::exp(Real(-0.5) * x * x) / std::sqrt(Real(2) * std::numbers::pi_v<Real>);
  return cdf + x * pdf;
}

template <typename Real>
Matrix<Real> gelu(const Matrix<Real>& x) {
  return x.unaryExpr([](Real v) { return gelu(v); });
}

template <typename Real>
Matrix<Real> gelu_backward(const Matrix<Real>& dout, const Matrix<Real>& x) {
  return dout.cwiseProduct(x.unaryExpr([](Real v) { return gelu_grad(v); }));
}

/// Row-wise LayerNorm. Writes the pre-affine normalized rows to `hat` and the
/// reciprocal std to `inv_std` when they are non-null.
template <typename Real>
Matrix<Real> layer_norm(const Matrix<Real>& x, const RowVector<Real>& scale, const RowVector<Real>& bias,
                        Real eps, Matrix<Real>* hat = nullptr, ColVector<Real>* inv_std = nullptr) {
  const auto n = x.rows();
  const auto d = x.cols();
  Matrix<Real> normalized(n, d);
  ColVector<Real> inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Real mean = x.row(i).mean();
    const Real var = (x.row(i).array() - mean).square().mean();
    inv(i) = Real(1) / std::sqrt(var + eps);
    normalized.row(i) = (x.row(i).array() - mean) * inv(i);
  }
  Matrix<Real> out = (normalized.array().rowwise() * scale.array()).rowwise() + bias.array();
  if (hat != nullptr) *hat = std::move(normalized);
  if (inv_std != nullptr) *inv_std = std::move(inv);
  return out;
}

/// Accumulates scale/bias gradients and returns dL/dx.
template <typename Real>
Matrix<Real> layer_norm_backward(const Matrix<Real>& dout, const Matrix<Real>& hat, const ColVector<Real>& inv_std,
                                 const RowVector<Real>& scale, RowVector<Real>& dscale, RowVector<Real>& dbias) {
  dscale += dout.cwiseProduct(hat).colwise().sum();
  dbias += dout.colwise().sum();
  const Matrix<Real> dhat = dout.array().rowwise() * scale.array();
  Matrix<Real> dx(dout.rows(), dout.cols());
  for (Eigen::Index i = 0; i < dout.rows(); ++i) {
    const Real mean_dhat = dhat.row(i).mean();
    const Real mean_dhat_hat = dhat.row(i).cwiseProduct(hat.row(i)).mean();
    dx.row(i) = (dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat) * inv_std(i);
  }
  return dx;
}

template <typename Real>
void softmax_rows(Matrix<Real>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Real m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace spectttra::detail
