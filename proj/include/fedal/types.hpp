#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedal {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = VectorX<double>;
using Mat = MatrixX<double>;
using Index = Eigen::Index;

/// Cone attached to a constraint block: c(w) <= 0 or c(w) = 0.
enum class Cone { NonnegativeOrthant, ZeroCone };

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_dimension(Index got, Index expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(got) +
                         " does not match expected " + std::to_string(expected));
  }
}

/// Infinity norm that is 0 for empty vectors.
template <typename Derived>
typename Derived::Scalar inf_norm(const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  return v.size() == 0 ? S(0) : v.template lpNorm<Eigen::Infinity>();
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

/// Projection onto the dual cone of the multipliers: [v]_+ for orthant blocks,
/// identity for equality blocks (free multipliers).
template <typename Derived>
VectorX<typename Derived::Scalar> project_cone_dual(const Eigen::MatrixBase<Derived>& v, Cone cone) {
  if (cone == Cone::ZeroCone) return v;
  return v.cwiseMax(typename Derived::Scalar(0));
}

/// Numerically stable log(1 + e^x).
template <typename Scalar>
Scalar softplus(Scalar x) {
  using std::abs, std::exp, std::log1p, std::max;
  return max(x, Scalar(0)) + log1p(exp(-abs(x)));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace fedal
