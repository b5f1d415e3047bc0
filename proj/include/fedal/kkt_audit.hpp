#pragma once

#include "fedal/core_model.hpp"

namespace fedal {

/// Threshold above which an orthant multiplier counts as active.
inline constexpr double kActiveMultiplier = 1e-12;
inline constexpr double kAuditSlack = 1e-9;

struct KktResiduals {
  double stationarity = kInf;
  double feasibility = kInf;
};

/// Residuals of the (eps1, eps2)-optimality conditions, computed only from the
/// problem data and (w, mu):
///   stationarity = dist_inf(0, sum grad f_i(w) + d h(w) + sum grad c_i(w) mu_i)
///   feasibility  = dist_inf(c(w), N(mu))
/// For h != 0 the stationarity is the prox-gradient residual
/// ||w - prox_h(w - g)||_inf: zero exactly at stationary points, but only a
/// surrogate for the distance elsewhere. The normal-cone term is |c_j| where mu_j > 1e-12 or the block
/// is an equality block, and [c_j]_+ otherwise; it jumps at mu_j = 0 when
/// c_j < 0, as the exact distance does.
KktResiduals kkt_residuals(const ProblemSpec& p, const Vec& w, const MultiplierState& mu);

struct AuditReport {
  bool pass = false;
  KktResiduals residuals;
};

/// pass iff stationarity <= eps1 + 1e-9 and feasibility <= eps2 + 1e-9.
AuditReport assert_output_contract(const ProblemSpec& p, const Vec& w, const MultiplierState& mu, double eps1,
                                   double eps2);

}  // namespace fedal
