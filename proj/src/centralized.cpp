#include "fedal/centralized.hpp"

#include <algorithm>
#include <string>

#include "fedal/kkt_audit.hpp"
#include "fedal/prox_solver.hpp"

namespace fedal {

ProximalLagrangian::ProximalLagrangian(const ProblemSpec& p, MultiplierState mu, double beta, Vec anchor)
    : p_(p), mu_(std::move(mu)), beta_(beta), anchor_(std::move(anchor)) {
  if (!mu_.cone_feasible(p_)) throw std::invalid_argument("ProximalLagrangian: multipliers are not cone-feasible");
  require_dimension(anchor_.size(), p_.dimension(), "ProximalLagrangian anchor");
}

double ProximalLagrangian::value_and_gradient(const Vec& w, Vec& grad) const {
  grad.setZero(p_.dimension());
  Vec g;
  double v = 0.0;
  for (const auto& c : p_.clients()) {
    v += c.objective->value_and_gradient(w, g);
    grad += g;
  }
  Vec values;
  Mat jac;
  for (std::size_t i = 0; i < p_.num_blocks(); ++i) {
    const ConstraintBlock& b = p_.block(i);
    if (b.size() == 0) continue;
    b.evaluate(w, values, jac);
    const Vec shifted = project_cone_dual(mu_.blocks[i] + beta_ * values, b.cone());
    v += (shifted.squaredNorm() - mu_.blocks[i].squaredNorm()) / (2.0 * beta_);
    grad.noalias() += jac * shifted;
  }
  const Vec diff = w - anchor_;
  v += diff.squaredNorm() / (2.0 * beta_);
  grad += diff / beta_;
  return v;
}

OuterResult run_centralized(const ProblemSpec& p, const OuterConfig& cfg) {
  cfg.validate(p);
  OuterResult res;
  res.heuristic_regime = !p.convex();

  Vec w = cfg.w0 ? *cfg.w0 : Vec::Zero(p.dimension());
  MultiplierState mu = cfg.mu0 ? *cfg.mu0 : MultiplierState::zeros(p);
  res.trace.push_back(make_trace_record(p, 0, w));
  if (cfg.record_iterates) res.iterates.push_back({w, mu, 0});

  Vec best_w = w;
  MultiplierState best_mu = mu;
  double best_bound = kInf;
  auto fail = [&](const std::string& why, int k) {
    res.w = best_w;
    res.mu = best_mu;
    res.outer_iterations = k;
    const auto audit = kkt_residuals(p, best_w, best_mu);
    return OuterSolveError(why, std::move(res), audit.stationarity, audit.feasibility);
  };

  for (int k = 0; k < cfg.max_outer_iterations; ++k) {
    const double tau = cfg.subproblem_tolerance(k);
    const ProximalLagrangian ell(p, mu, cfg.beta, w);
    StationarityCertificate cert;
    try {
      cert = solve_composite({ell, p.simple_term(), 1.0 / cfg.beta, w}, tau, cfg.inner.prox);
    } catch (const ProxSolverError& e) {
      throw fail(std::string("subproblem solver failed at outer iteration ") + std::to_string(k) + ": " + e.what(), k);
    }

    MultiplierState next = mu;
    double max_delta = 0.0;
    for (std::size_t i = 0; i < p.num_blocks(); ++i) {
      const ConstraintBlock& b = p.block(i);
      if (b.size() == 0) continue;
      next.blocks[i] = update_multiplier(mu.blocks[i], b.values(cert.point), cfg.beta, b.cone());
      max_delta = std::max(max_delta, inf_norm(Vec(next.blocks[i] - mu.blocks[i])));
    }
    const double step = inf_norm(Vec(cert.point - w));
    const double deltas[] = {max_delta};
    const bool done = outer_check_termination(step, tau, deltas, cfg.beta, cfg.eps1, cfg.eps2);
    w = cert.point;
    mu = std::move(next);

    res.total_inner_iterations += cert.iterations;
    TraceRecord row = make_trace_record(p, k + 1, w);
    row.step_inf = step;
    row.max_multiplier_delta = max_delta;
    row.subproblem_tolerance = tau;
    row.inner_iterations = cert.iterations;
    row.cumulative_inner_iterations = res.total_inner_iterations;
    res.trace.push_back(std::move(row));
    if (cfg.record_iterates) res.iterates.push_back({w, mu, k + 1});

    const double bound = std::max(step / cfg.beta + tau, max_delta / cfg.beta);
    if (bound < best_bound) {
      best_bound = bound;
      best_w = w;
      best_mu = mu;
    }
    if (done) {
      res.w = w;
      res.mu = mu;
      res.outer_iterations = k + 1;
      return res;
    }
  }
  throw fail("outer iteration cap reached (" + std::to_string(cfg.max_outer_iterations) + ")",
             cfg.max_outer_iterations);
}

}  // namespace fedal
