#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedal/admm_inner.hpp"
#include "fedal/core_model.hpp"
#include "fedal/federation.hpp"

namespace fedal {

/// Client (or server, with no objective) share of the proximal AL subproblem:
///   P(w) = f(w) + (||Pi(mu + beta c(w))||^2 - ||mu||^2) / (2 beta)
///          + ||w - anchor||^2 / (2 (n+1) beta),
/// Pi = [.]_+ on orthant blocks, identity on equality blocks.
class MeritFunction final : public SmoothFunction {
 public:
  MeritFunction(const SmoothFunction* objective, const ConstraintBlock& block, Vec mu, double beta, Vec anchor,
                std::size_t num_clients);

  Index dimension() const override { return anchor_.size(); }
  double value_and_gradient(const Vec& w, Vec& grad) const override;

  /// 1 / ((n+1) beta).
  double strong_convexity() const { return prox_weight_; }
  const Vec& anchor() const { return anchor_; }

 private:
  const SmoothFunction* objective_;
  const ConstraintBlock& block_;
  Vec mu_;
  double beta_;
  Vec anchor_;
  double prox_weight_;
};

/// P_{0,k}, ..., P_{n,k}; entry 0 belongs to the server.
std::vector<MeritFunction> build_merits(const ProblemSpec& p, const Vec& anchor, const MultiplierState& mu,
                                        double beta);

/// Multiplier update mu^{k+1} = Pi(mu^k + beta c(w^{k+1})).
Vec update_multiplier(const Vec& mu, const Vec& constraint_values, double beta, Cone cone);

/// rho_i = value (Constant) or rho_i = value * m_i (PerSample).
struct RhoRule {
  enum class Kind { Constant, PerSample };
  Kind kind = Kind::PerSample;
  double value = 1.0;

  std::vector<double> resolve(const ProblemSpec& p) const;
  friend bool operator==(const RhoRule&, const RhoRule&) = default;
};

struct OuterConfig {
  double eps1 = 1e-3;
  double eps2 = 1e-3;
  double beta = 300.0;
  double s_bar = 1e-3;
  std::optional<Vec> w0;              // zero vector when absent
  std::optional<MultiplierState> mu0;  // zeros when absent
  InnerConfig inner;                   // tolerance is overwritten by tau_k
  RhoRule rho_rule;                    // used when inner.rho is empty
  int max_outer_iterations = 5000;
  /// Replaces tau_k = s_bar / (k+1)^2 (exact-subproblem studies).
  std::optional<double> fixed_subproblem_tolerance;
  bool record_iterates = false;

  void validate(const ProblemSpec& p) const;
  double subproblem_tolerance(int k) const;
};

struct OuterState {
  Vec w;
  MultiplierState mu;
  int k = 0;
};

/// One row per outer iteration (row 0 is the starting point).
struct TraceRecord {
  int k = 0;
  double objective = 0.0;
  std::vector<double> block_metrics;  // reported_metric of block 0..n
  double mean_client_feasibility = 0.0;
  double max_client_feasibility = 0.0;
  double global_feasibility = 0.0;  // block 0
  double step_inf = 0.0;            // ||w^{k+1} - w^k||_inf
  double max_multiplier_delta = 0.0;
  double subproblem_tolerance = 0.0;
  int inner_iterations = 0;
  long cumulative_inner_iterations = 0;
  std::size_t cumulative_rounds = 0;
  std::size_t cumulative_scalars = 0;
};

struct OuterResult {
  Vec w;
  MultiplierState mu;
  int outer_iterations = 0;
  long total_inner_iterations = 0;
  std::vector<TraceRecord> trace;
  CommLedger ledger;
  bool heuristic_regime = false;
  std::vector<OuterState> iterates;  // filled when record_iterates
};

/// Outer iteration cap or an inner-solver failure. Carries the trace so far and
/// the iterate with the smallest certified residual bound, with its audit.
class OuterSolveError : public std::runtime_error {
 public:
  OuterSolveError(const std::string& what, OuterResult partial, double audit_stationarity, double audit_feasibility)
      : std::runtime_error(what), partial_(std::move(partial)), stat_(audit_stationarity), feas_(audit_feasibility) {}
  const OuterResult& partial() const { return partial_; }
  double audit_stationarity() const { return stat_; }
  double audit_feasibility() const { return feas_; }

 private:
  OuterResult partial_;
  double stat_;
  double feas_;
};

/// ||w^{k+1} - w^k||_inf + beta tau_k <= beta eps1 and max_i ||dmu_i||_inf <= beta eps2.
bool outer_check_termination(double step_inf, double tau, std::span<const double> multiplier_deltas, double beta,
                             double eps1, double eps2);

/// Trace row for (w, mu) evaluated directly on the problem (diagnostics only).
TraceRecord make_trace_record(const ProblemSpec& p, int k, const Vec& w);

struct OuterStepReport {
  double tau = 0.0;
  double step_inf = 0.0;
  double max_multiplier_delta = 0.0;
  int inner_iterations = 0;
  bool terminated = false;
};

/// Federated driver: a server plus n client nodes talking over an in-process
/// transport. Each client keeps f_i, c_i and mu_i to itself.
class FederatedSolver {
 public:
  FederatedSolver(const ProblemSpec& p, OuterConfig cfg);
  ~FederatedSolver();
  FederatedSolver(const FederatedSolver&) = delete;
  FederatedSolver& operator=(const FederatedSolver&) = delete;

  /// One outer iteration: inner ADMM solve, multiplier updates, termination test.
  OuterStepReport step();

  /// Iterate until termination (throws OuterSolveError at the cap).
  OuterResult run();

  const Vec& w() const { return w_; }
  int k() const { return k_; }
  /// (w^k, mu^k) as held across server and clients.
  OuterState state() const;
  const CommLedger& ledger() const;

 private:
  class Client;

  const ProblemSpec& p_;
  OuterConfig cfg_;
  double sigma_;
  Vec w_;
  Vec mu0_;
  int k_ = 0;
  std::vector<std::unique_ptr<Client>> clients_;
  std::unique_ptr<InProcessTransport> transport_;
};

/// Proximal AL with federated ADMM subproblem solves.
OuterResult run_outer(const ProblemSpec& p, const OuterConfig& cfg);

}  // namespace fedal
