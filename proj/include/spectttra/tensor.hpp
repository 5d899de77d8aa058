#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace spectttra {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Real>
using RowVector = Eigen::Matrix<Real, 1, Eigen::Dynamic>;

template <typename Real>
using ColVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// Every stochastic operation takes one of these explicitly; there is no global generator.
using Rng = std::mt19937_64;

/// Raised when a forward or backward pass produces NaN/Inf. `where()` names the layer or tensor.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(std::string where)
      : std::runtime_error("non-finite value in " + where), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace spectttra
