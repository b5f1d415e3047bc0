#pragma once

// Independent reference computations shared by the unit, property and
// acceptance tests. Nothing here calls into solver internals.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "fedal/core_model.hpp"

namespace fedal::testing {

inline Vec random_vec(Index d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(d);
  for (Index k = 0; k < d; ++k) v[k] = n(rng);
  return v;
}

/// Symmetric positive definite with eigenvalues in [lo, hi].
inline Mat random_spd(Index d, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
  Mat G(d, d);
  for (Index c = 0; c < d; ++c) G.col(c) = random_vec(d, rng);
  const Mat Q = Eigen::HouseholderQR<Mat>(G).householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  Vec D(d);
  for (Index k = 0; k < d; ++k) D[k] = u(rng);
  const Mat A = Q * D.asDiagonal() * Q.transpose();
  return 0.5 * (A + A.transpose());
}

/// Central differences of f at w with step h.
template <typename F>
Vec fd_gradient_fn(const F& f, const Vec& w, double h = 1e-6) {
  Vec g(w.size());
  for (Index k = 0; k < w.size(); ++k) {
    Vec a = w, b = w;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline Vec fd_gradient(const SmoothFunction& f, const Vec& w, double h = 1e-6) {
  return fd_gradient_fn([&](const Vec& x) { return f.value(x); }, w, h);
}

/// Transposed Jacobian (d x m) by central differences.
inline Mat fd_jacobian_t(const ConstraintBlock& c, const Vec& w, double h = 1e-6) {
  Mat J(w.size(), c.size());
  for (Index k = 0; k < w.size(); ++k) {
    Vec a = w, b = w;
    a[k] += h;
    b[k] -= h;
    J.row(k) = ((c.values(a) - c.values(b)) / (2.0 * h)).transpose();
  }
  return J;
}

/// ||a - b||_inf / max(1, ||b||_inf): relative for large entries, absolute near zero.
template <typename A, typename B>
double rel_err(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.size() == 0) return 0.0;
  return (a - b).template lpNorm<Eigen::Infinity>() / std::max(1.0, b.template lpNorm<Eigen::Infinity>());
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares y ~ intercept + slope x.
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  LinearFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Proximal AL objective written out directly from its definition:
///   sum f_i + h + (1/2b) sum (||Pi(mu_i + b c_i)||^2 - ||mu_i||^2) + ||w - anchor||^2 / (2b).
inline double direct_proximal_al(const ProblemSpec& p, const Vec& w, const MultiplierState& mu, double beta,
                                 const Vec& anchor) {
  double v = p.simple_term().value(w);
  for (const auto& c : p.clients()) v += c.objective->value(w);
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const auto& b = p.block(i);
    if (b.size() == 0) continue;
    Vec shifted = mu.blocks[i] + beta * b.values(w);
    if (b.cone() == Cone::NonnegativeOrthant) {
      for (Index j = 0; j < shifted.size(); ++j) shifted[j] = shifted[j] > 0 ? shifted[j] : 0.0;
    }
    v += (shifted.squaredNorm() - mu.blocks[i].squaredNorm()) / (2.0 * beta);
  }
  return v + (w - anchor).squaredNorm() / (2.0 * beta);
}

/// Closed-form minimizer of P_0 + sum_i P_i with P_i(w) = 0.5 w'Q_i w + r_i'w
/// (i = 0 the server), and the multipliers lambda_i* = -grad P_i(w*) of the
/// consensus split u_i = w, i = 1..n.
struct ConsensusOracle {
  Vec w;
  std::vector<Vec> lambda;
};

inline ConsensusOracle consensus_oracle(const Mat& Q0, const Vec& r0, const std::vector<Mat>& Q,
                                        const std::vector<Vec>& r) {
  Mat H = Q0;
  Vec g = r0;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    H += Q[i];
    g += r[i];
  }
  ConsensusOracle o;
  o.w = H.llt().solve(-g);
  for (std::size_t i = 0; i < Q.size(); ++i) o.lambda.push_back(-(Q[i] * o.w + r[i]));
  return o;
}

}  // namespace fedal::testing
