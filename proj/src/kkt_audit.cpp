#include "fedal/kkt_audit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedal {

KktResiduals kkt_residuals(const ProblemSpec& p, const Vec& w, const MultiplierState& mu) {
  require_dimension(w.size(), p.dimension(), "kkt_residuals point");
  if (mu.blocks.size() != p.num_blocks())
    throw DimensionError("kkt_residuals: expected " + std::to_string(p.num_blocks()) + " multiplier blocks");
  for (std::size_t i = 0; i < p.num_blocks(); ++i)
    require_dimension(mu.blocks[i].size(), p.block(i).size(), "kkt_residuals multiplier block");
  if (!mu.cone_feasible(p)) throw std::invalid_argument("kkt_residuals: multipliers are not cone-feasible");

  Vec grad = Vec::Zero(p.dimension());
  Vec g;
  for (const auto& c : p.clients()) {
    c.objective->value_and_gradient(w, g);
    grad += g;
  }

  double feas = 0.0;
  Vec values;
  Mat jac;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const ConstraintBlock& b = p.block(i);
    if (b.size() == 0) continue;
    b.evaluate(w, values, jac);
    grad += jac * mu.blocks[i];
    for (Index j = 0; j < values.size(); ++j) {
      const double cj = values[j];
      const bool active = b.cone() == Cone::ZeroCone || mu.blocks[i][j] > kActiveMultiplier;
      feas = std::max(feas, active ? std::abs(cj) : std::max(cj, 0.0));
    }
  }

  KktResiduals r;
  const SimpleTerm& h = p.simple_term();
  r.stationarity = h.is_zero() ? inf_norm(grad) : inf_norm(Vec(w - h.prox(w - grad, 1.0)));
  r.feasibility = feas;
  return r;
}

AuditReport assert_output_contract(const ProblemSpec& p, const Vec& w, const MultiplierState& mu, double eps1,
                                   double eps2) {
  AuditReport rep;
  rep.residuals = kkt_residuals(p, w, mu);
  rep.pass = rep.residuals.stationarity <= eps1 + kAuditSlack && rep.residuals.feasibility <= eps2 + kAuditSlack;
  return rep;
}

}  // namespace fedal
