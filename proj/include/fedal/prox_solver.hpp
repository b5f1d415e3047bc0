#pragma once

#include <stdexcept>
#include <vector>

#include "fedal/core_model.hpp"

namespace fedal {

/// min phi(x) = g(x) + h(x) with g strongly convex (modulus sigma > 0).
struct CompositeProblem {
  const SmoothFunction& smooth;
  const SimpleTerm& simple;
  double strong_convexity;
  Vec start;
};

/// A point together with an explicit bound dist_inf(0, d phi(x)) <= residual.
struct StationarityCertificate {
  Vec point;
  double residual = kInf;
  int iterations = 0;
};

struct ProxSolverOptions {
  int max_iterations = 100000;
  double backtrack_factor = 0.5;
  double min_step = 1e-30;
};

/// Per-iteration history, filled only when requested.
struct ProxSolverTrace {
  std::vector<double> residuals;
  std::vector<double> objectives;
};

/// Iteration cap or line-search breakdown; carries the best certificate seen.
class ProxSolverError : public std::runtime_error {
 public:
  ProxSolverError(const std::string& what, StationarityCertificate best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const StationarityCertificate& best() const { return best_; }

 private:
  StationarityCertificate best_;
};

/// Proximal gradient with a secant (Barzilai-Borwein) trial step and halving
/// backtracking on the sufficient-decrease test. The returned residual is
///   || (x_prev - x)/alpha + grad g(x) - grad g(x_prev) ||_inf,
/// x = prox_{alpha h}(x_prev - alpha grad g(x_prev)), or ||grad g(x)||_inf when h == 0.
/// Throws std::invalid_argument for tol <= 0, std::domain_error on a non-finite
/// gradient and ProxSolverError when the iteration cap is reached.
StationarityCertificate solve_composite(const CompositeProblem& problem, double tol,
                                        const ProxSolverOptions& options = {},
                                        ProxSolverTrace* trace = nullptr);

}  // namespace fedal
