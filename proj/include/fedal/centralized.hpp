#pragma once

#include "fedal/proxal_outer.hpp"

namespace fedal {

/// Smooth part of the centralized proximal AL subproblem
///   f(w) + (||Pi(mu + beta c(w))||^2 - ||mu||^2) / (2 beta) + ||w - anchor||^2 / (2 beta),
/// assembled monolithically from every client's data.
class ProximalLagrangian final : public SmoothFunction {
 public:
  ProximalLagrangian(const ProblemSpec& p, MultiplierState mu, double beta, Vec anchor);

  Index dimension() const override { return p_.dimension(); }
  double value_and_gradient(const Vec& w, Vec& grad) const override;

 private:
  const ProblemSpec& p_;
  MultiplierState mu_;
  double beta_;
  Vec anchor_;
};

/// Centralized proximal AL baseline. It reads every client's data directly and
/// is not a federated method; it exists for comparison. Uses the same tau_k
/// schedule, multiplier update and termination test as run_outer.
OuterResult run_centralized(const ProblemSpec& p, const OuterConfig& cfg);

}  // namespace fedal
