#include "fedal/prox_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedal {
namespace {

void check_finite(double value, const Vec& grad) {
  if (!std::isfinite(value) || !grad.allFinite())
    throw std::domain_error("solve_composite: non-finite value or gradient");
}

double initial_step(const SmoothFunction& g, const Vec& x, const Vec& gx, double max_step) {
  const double gnorm = gx.norm();
  if (!(gnorm > 0.0)) return std::min(1.0, max_step);
  const double t = 1e-3 * std::max(1.0, x.norm()) / gnorm;
  const Vec y = x - t * gx;
  Vec gy;
  g.value_and_gradient(y, gy);
  const double curvature = (gy - gx).norm() / (y - x).norm();
  if (!std::isfinite(curvature) || !(curvature > 0.0)) return std::min(1.0, max_step);
  return std::min(1.0 / curvature, max_step);
}

}  // namespace

StationarityCertificate solve_composite(const CompositeProblem& p, double tol, const ProxSolverOptions& opt,
                                        ProxSolverTrace* trace) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_composite: tol must be positive");
  if (!(p.strong_convexity > 0.0)) throw std::invalid_argument("solve_composite: sigma must be positive");
  require_dimension(p.start.size(), p.smooth.dimension(), "solve_composite start");

  const SmoothFunction& g = p.smooth;
  const SimpleTerm& h = p.simple;
  const bool zero_h = h.is_zero();
  // Any admissible step is at most 1/L <= 1/sigma.
  const double max_step = 1.0 / p.strong_convexity;
  constexpr double eps = std::numeric_limits<double>::epsilon();

  Vec x = p.start;
  Vec gx;
  double fx = g.value_and_gradient(x, gx);
  check_finite(fx, gx);

  StationarityCertificate best{x, kInf, 0};
  if (zero_h) {
    best.residual = inf_norm(gx);
    if (trace) {
      trace->residuals.push_back(best.residual);
      trace->objectives.push_back(fx);
    }
    if (best.residual <= tol) return best;
  }

  double alpha = initial_step(g, x, gx, max_step);
  Vec y, gy, s;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    double fy = 0.0;
    while (true) {
      y = zero_h ? Vec(x - alpha * gx) : h.prox(x - alpha * gx, alpha);
      s = y - x;
      fy = g.value_and_gradient(y, gy);
      check_finite(fy, gy);
      const double ss = s.squaredNorm();
      const double model = fx + gx.dot(s) + ss / (2.0 * alpha);
      if (fy <= model) break;
      // Near convergence the value test drowns in rounding; fall back to the
      // equivalent curvature test computed from gradients. The value of g is
      // often a small difference of O(1) terms, hence the floor of 1.
      const double noise = 64.0 * eps * std::max({1.0, std::abs(fx), std::abs(fy)});
      if (fy - model <= noise && (gy - gx).dot(s) <= ss / alpha) break;
      alpha *= opt.backtrack_factor;
      if (alpha < opt.min_step) {
        best.iterations = it;
        throw ProxSolverError("solve_composite: line search stalled", best);
      }
    }

    const double residual = zero_h ? inf_norm(gy) : inf_norm(Vec(-s / alpha + gy - gx));
    if (trace) {
      trace->residuals.push_back(residual);
      trace->objectives.push_back(fy + (zero_h ? 0.0 : h.value(y)));
    }
    if (residual < best.residual) best = {y, residual, it};
    if (residual <= tol) {
      best.iterations = it;
      return {y, residual, it};
    }

    const Vec dg = gy - gx;
    const double sy = s.dot(dg);
    const double next = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * alpha;
    alpha = std::min(std::isfinite(next) && next > 0.0 ? next : 2.0 * alpha, max_step);
    x.swap(y);
    gx.swap(gy);
    fx = fy;
  }
  best.iterations = opt.max_iterations;
  throw ProxSolverError("solve_composite: iteration cap exceeded", best);
}

}  // namespace fedal
