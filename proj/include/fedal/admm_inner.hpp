#pragma once

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedal/core_model.hpp"
#include "fedal/federation.hpp"
#include "fedal/prox_solver.hpp"

namespace fedal {

/// Inexact consensus ADMM for
///   min_w  sum_{i=1..n} P_i(w) + P_0(w) + h(w),
/// every P_i strongly convex with modulus sigma. Client i owns P_i; the
/// server owns P_0 and h.
struct InnerConfig {
  double tolerance = 1.0;  // tau in (0, 1]
  double q = 0.5;          // eps_{t+1} = max(q^t, min_subproblem_tolerance)
  /// Floor on q^t; below about 1e-13 the certificate drowns in rounding.
  double min_subproblem_tolerance = 1e-12;
  std::vector<double> rho;
  int max_iterations = 10000;
  /// Replaces q^t as the subproblem tolerance (used for exact-solve studies).
  std::optional<double> forced_subproblem_tolerance;
  ProxSolverOptions prox;
  bool parallel_clients = false;

  void validate(std::size_t num_clients) const;
  double subproblem_tolerance(int t) const;
};

/// Client-side ADMM variables. `shifted` = u + lambda / rho at all times.
struct ClientAdmmState {
  Vec u;
  Vec lambda;
  Vec shifted;
  double rho = 1.0;
  double residual = 0.0;  // eps~_{i,t}
};

/// (u, lambda, u~) = (w0, -grad P_i(w0), w0 - grad P_i(w0)/rho).
ClientAdmmState client_init(const SmoothFunction& merit, const Vec& anchor, double rho);

/// One client update: approximately minimize
///   P_i(u) + <lambda, u - w> + rho/2 ||u - w||^2
/// to ||grad||_inf <= eps, then update lambda, u~ and eps~.
ClientAdmmState client_step(const SmoothFunction& merit, double sigma, const ClientAdmmState& state,
                            const Vec& w_next, double eps, const ProxSolverOptions& prox = {});

/// Approximately minimize P_0(w) + h(w) + sum_i rho_i/2 ||u~_i - w||^2 to
/// dist_inf(0, d phi) <= eps, warm-started at `start`.
StationarityCertificate server_step(const SmoothFunction& server_merit, const SimpleTerm& h, double sigma,
                                    std::span<const Vec> shifted, std::span<const double> rho, const Vec& start,
                                    double eps, const ProxSolverOptions& prox = {});

/// eps + sum_i eps~_i <= tau.
bool inner_check_termination(double eps, std::span<const double> client_residuals, double tau);

/// Everything an ADMM solve needs when all merits are visible in one place.
struct InnerModel {
  const SmoothFunction& server_merit;
  const SimpleTerm& simple;
  std::vector<const SmoothFunction*> client_merits;
  double strong_convexity;
};

struct InnerState {
  Vec w;
  std::vector<ClientAdmmState> clients;
  int t = 0;
  double next_tolerance = 1.0;
};

InnerState inner_init(const InnerModel& model, const Vec& anchor, const InnerConfig& cfg);

struct InnerRoundRecord {
  int t = 0;
  double server_tolerance = 0.0;   // eps_{t+1}
  double client_residual_sum = 0.0;  // sum_i eps~_{i,t+1}
  std::size_t broadcasts = 0;        // cumulative, this solve
  std::size_t reports = 0;
};

struct InnerResult {
  Vec w;
  int iterations = 0;
  double measure = kInf;  // eps + sum eps~ at exit, bounds dist_inf(0, d ell(w))
  std::vector<InnerRoundRecord> trace;
};

class InnerIterationLimit : public std::runtime_error {
 public:
  InnerIterationLimit(Vec best, double best_measure, std::vector<InnerRoundRecord> trace)
      : std::runtime_error("run_inner: iteration cap reached"),
        best_(std::move(best)),
        measure_(best_measure),
        trace_(std::move(trace)) {}
  const Vec& best() const { return best_; }
  double best_measure() const { return measure_; }
  const std::vector<InnerRoundRecord>& trace() const { return trace_; }

 private:
  Vec best_;
  double measure_;
  std::vector<InnerRoundRecord> trace_;
};

/// Client endpoint handling the InnerInit and Inner phases. Subclasses choose
/// the merit for each solve and may handle further phases.
class AdmmClient : public ClientEndpoint {
 public:
  AdmmClient(std::uint64_t id, double rho, double sigma, InnerConfig cfg);

  std::optional<Message> on_message(const Message& msg) override;
  std::uint64_t messages_processed() const override { return processed_; }

  std::uint64_t id() const { return id_; }
  const ClientAdmmState& admm_state() const { return state_; }

 protected:
  /// Merit function for the solve anchored at `anchor`.
  virtual const SmoothFunction& prepare_merit(const Vec& anchor, const RoundId& round) = 0;
  virtual std::optional<Message> on_other(const Message& msg);

 private:
  std::uint64_t id_;
  double rho_;
  double sigma_;
  InnerConfig cfg_;
  const SmoothFunction* merit_ = nullptr;
  ClientAdmmState state_;
  std::uint64_t processed_ = 0;
};

/// AdmmClient with a fixed merit.
class FixedMeritClient final : public AdmmClient {
 public:
  FixedMeritClient(std::uint64_t id, const SmoothFunction& merit, double rho, double sigma, InnerConfig cfg)
      : AdmmClient(id, rho, sigma, std::move(cfg)), merit_(merit) {}

 protected:
  const SmoothFunction& prepare_merit(const Vec&, const RoundId&) override { return merit_; }

 private:
  const SmoothFunction& merit_;
};

/// Server side of the ADMM loop; every exchange with clients goes through
/// `transport`. `outer_round` tags the messages.
InnerResult run_inner_server(const SmoothFunction& server_merit, const SimpleTerm& h, double sigma,
                             const Vec& anchor, const InnerConfig& cfg, Transport& transport,
                             std::uint64_t outer_round = 0,
                             const std::function<void(int, const Vec&)>& after_round = {});

/// Called after every round with t, w^{t+1} and the client states.
using InnerObserver = std::function<void(int, const Vec&, const std::vector<ClientAdmmState>&)>;

/// Full simulation: builds one FixedMeritClient per merit and an in-process
/// transport. `ledger_out`, when given, receives the communication ledger.
InnerResult run_inner(const InnerModel& model, const Vec& anchor, const InnerConfig& cfg,
                      const InnerObserver& observer = {}, CommLedger* ledger_out = nullptr);

}  // namespace fedal
