#include "fedal/proxal_outer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedal/kkt_audit.hpp"

namespace fedal {

MeritFunction::MeritFunction(const SmoothFunction* objective, const ConstraintBlock& block, Vec mu, double beta,
                             Vec anchor, std::size_t num_clients)
    : objective_(objective),
      block_(block),
      mu_(std::move(mu)),
      beta_(beta),
      anchor_(std::move(anchor)),
      prox_weight_(1.0 / (static_cast<double>(num_clients + 1) * beta)) {
  require_dimension(mu_.size(), block_.size(), "MeritFunction multiplier");
  require_dimension(block_.dimension(), anchor_.size(), "MeritFunction block");
  if (objective_) require_dimension(objective_->dimension(), anchor_.size(), "MeritFunction objective");
  if (!(beta_ > 0.0)) throw std::invalid_argument("MeritFunction: beta must be positive");
}

double MeritFunction::value_and_gradient(const Vec& w, Vec& grad) const {
  double v = 0.0;
  if (objective_) {
    v = objective_->value_and_gradient(w, grad);
  } else {
    grad.setZero(w.size());
  }
  if (block_.size() > 0) {
    Vec c;
    Mat jac;
    block_.evaluate(w, c, jac);
    const Vec shifted = project_cone_dual(mu_ + beta_ * c, block_.cone());
    v += (shifted.squaredNorm() - mu_.squaredNorm()) / (2.0 * beta_);
    grad.noalias() += jac * shifted;
  }
  const Vec diff = w - anchor_;
  v += 0.5 * prox_weight_ * diff.squaredNorm();
  grad += prox_weight_ * diff;
  return v;
}

std::vector<MeritFunction> build_merits(const ProblemSpec& p, const Vec& anchor, const MultiplierState& mu,
                                        double beta) {
  if (!mu.cone_feasible(p)) throw std::invalid_argument("build_merits: multipliers are not cone-feasible");
  std::vector<MeritFunction> out;
  out.reserve(p.num_blocks());
  out.emplace_back(nullptr, p.server_constraints(), mu.blocks[0], beta, anchor, p.num_clients());
  for (std::size_t i = 0; i < p.num_clients(); ++i)
    out.emplace_back(p.client(i).objective.get(), *p.client(i).constraints, mu.blocks[i + 1], beta, anchor,
                     p.num_clients());
  return out;
}

Vec update_multiplier(const Vec& mu, const Vec& constraint_values, double beta, Cone cone) {
  return project_cone_dual(mu + beta * constraint_values, cone);
}

std::vector<double> RhoRule::resolve(const ProblemSpec& p) const {
  if (!(value > 0.0)) throw std::invalid_argument("RhoRule: value must be positive");
  std::vector<double> rho;
  for (const auto& c : p.clients()) rho.push_back(kind == Kind::Constant ? value : value * c.weight);
  return rho;
}

void OuterConfig::validate(const ProblemSpec& p) const {
  if (!(eps1 > 0.0 && eps1 < 1.0) || !(eps2 > 0.0 && eps2 < 1.0))
    throw std::invalid_argument("OuterConfig: eps1, eps2 must lie in (0, 1)");
  if (!(beta > 0.0)) throw std::invalid_argument("OuterConfig: beta must be positive");
  if (!(s_bar > 0.0)) throw std::invalid_argument("OuterConfig: s_bar must be positive");
  if (max_outer_iterations < 1) throw std::invalid_argument("OuterConfig: max_outer_iterations must be >= 1");
  if (w0) require_dimension(w0->size(), p.dimension(), "OuterConfig w0");
  if (mu0 && !mu0->cone_feasible(p)) throw std::invalid_argument("OuterConfig: mu0 is not cone-feasible");
  if (fixed_subproblem_tolerance && !(*fixed_subproblem_tolerance > 0.0))
    throw std::invalid_argument("OuterConfig: fixed subproblem tolerance must be positive");
}

double OuterConfig::subproblem_tolerance(int k) const {
  if (fixed_subproblem_tolerance) return *fixed_subproblem_tolerance;
  const double k1 = static_cast<double>(k) + 1.0;
  return s_bar / (k1 * k1);
}

bool outer_check_termination(double step_inf, double tau, std::span<const double> multiplier_deltas, double beta,
                             double eps1, double eps2) {
  double max_delta = 0.0;
  for (double d : multiplier_deltas) max_delta = std::max(max_delta, d);
  return step_inf + beta * tau <= beta * eps1 && max_delta <= beta * eps2;
}

TraceRecord make_trace_record(const ProblemSpec& p, int k, const Vec& w) {
  TraceRecord r;
  r.k = k;
  r.objective = eval_aggregate_objective(p, w);
  r.block_metrics.reserve(p.num_blocks());
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    const ConstraintBlock& b = p.block(i);
    const double metric = b.size() > 0 ? b.reported_metric(b.values(w)) : 0.0;
    r.block_metrics.push_back(metric);
    if (i == 0) {
      r.global_feasibility = metric;
    } else if (b.size() > 0) {
      sum += metric;
      r.max_client_feasibility = count == 0 ? metric : std::max(r.max_client_feasibility, metric);
      ++count;
    }
  }
  r.mean_client_feasibility = count > 0 ? sum / count : 0.0;
  return r;
}

// Client node: owns f_i, c_i and mu_i; answers ADMM rounds and multiplier updates.
class FederatedSolver::Client final : public AdmmClient {
 public:
  Client(std::uint64_t id, const ClientTerms& terms, Vec mu, double beta, std::size_t n, double rho, double sigma,
         InnerConfig cfg)
      : AdmmClient(id, rho, sigma, std::move(cfg)), terms_(terms), mu_(std::move(mu)), beta_(beta), n_(n) {}

  const Vec& mu() const { return mu_; }

 protected:
  const SmoothFunction& prepare_merit(const Vec& anchor, const RoundId&) override {
    merit_.emplace(terms_.objective.get(), *terms_.constraints, mu_, beta_, anchor, n_);
    return *merit_;
  }

  std::optional<Message> on_other(const Message& msg) override {
    if (const auto* b = std::get_if<BroadcastWeights>(&msg); b && b->round.phase == Phase::Outer) {
      const ConstraintBlock& block = *terms_.constraints;
      Vec next = block.size() > 0 ? update_multiplier(mu_, block.values(b->w), beta_, block.cone()) : mu_;
      const double delta = inf_norm(Vec(next - mu_));
      mu_ = std::move(next);
      return ClientMultiplierDelta{id(), delta};
    }
    return AdmmClient::on_other(msg);
  }

 private:
  const ClientTerms& terms_;
  Vec mu_;
  double beta_;
  std::size_t n_;
  std::optional<MeritFunction> merit_;
};

FederatedSolver::FederatedSolver(const ProblemSpec& p, OuterConfig cfg)
    : p_(p), cfg_(std::move(cfg)), sigma_(0.0) {
  cfg_.validate(p_);
  const std::size_t n = p_.num_clients();
  if (cfg_.inner.rho.empty()) cfg_.inner.rho = cfg_.rho_rule.resolve(p_);
  cfg_.inner.validate(n);
  sigma_ = 1.0 / (static_cast<double>(n + 1) * cfg_.beta);
  w_ = cfg_.w0 ? *cfg_.w0 : Vec::Zero(p_.dimension());
  const MultiplierState mu = cfg_.mu0 ? *cfg_.mu0 : MultiplierState::zeros(p_);
  mu0_ = mu.blocks[0];

  std::vector<ClientEndpoint*> endpoints;
  for (std::size_t i = 0; i < n; ++i) {
    clients_.push_back(std::make_unique<Client>(i + 1, p_.client(i), mu.blocks[i + 1], cfg_.beta, n,
                                                cfg_.inner.rho[i], sigma_, cfg_.inner));
    endpoints.push_back(clients_.back().get());
  }
  transport_ = std::make_unique<InProcessTransport>(endpoints, cfg_.inner.parallel_clients);
}

FederatedSolver::~FederatedSolver() = default;

const CommLedger& FederatedSolver::ledger() const { return transport_->ledger(); }

OuterState FederatedSolver::state() const {
  OuterState s;
  s.w = w_;
  s.k = k_;
  s.mu.blocks.push_back(mu0_);
  for (const auto& c : clients_) s.mu.blocks.push_back(c->mu());
  return s;
}

OuterStepReport FederatedSolver::step() {
  OuterStepReport rep;
  rep.tau = cfg_.subproblem_tolerance(k_);
  InnerConfig icfg = cfg_.inner;
  icfg.tolerance = rep.tau;

  const MeritFunction server_merit(nullptr, p_.server_constraints(), mu0_, cfg_.beta, w_, p_.num_clients());
  const InnerResult inner = run_inner_server(server_merit, p_.simple_term(), sigma_, w_, icfg, *transport_,
                                             static_cast<std::uint64_t>(k_));
  rep.inner_iterations = inner.iterations;
  const Vec& w_next = inner.w;

  std::vector<double> deltas;
  const ConstraintBlock& server_block = p_.server_constraints();
  if (server_block.size() > 0) {
    Vec next = update_multiplier(mu0_, server_block.values(w_next), cfg_.beta, server_block.cone());
    deltas.push_back(inf_norm(Vec(next - mu0_)));
    mu0_ = std::move(next);
  } else {
    deltas.push_back(0.0);
  }
  for (const auto& reply :
       transport_->roundtrip(BroadcastWeights{w_next, {static_cast<std::uint64_t>(k_), 0, Phase::Outer}}))
    deltas.push_back(std::get<ClientMultiplierDelta>(reply).delta_inf);

  rep.step_inf = inf_norm(Vec(w_next - w_));
  rep.max_multiplier_delta = *std::max_element(deltas.begin(), deltas.end());
  rep.terminated = outer_check_termination(rep.step_inf, rep.tau, deltas, cfg_.beta, cfg_.eps1, cfg_.eps2);
  w_ = w_next;
  ++k_;
  return rep;
}

OuterResult FederatedSolver::run() {
  OuterResult res;
  res.heuristic_regime = !p_.convex();
  res.trace.push_back(make_trace_record(p_, k_, w_));
  if (cfg_.record_iterates) res.iterates.push_back(state());

  OuterState best = state();
  double best_bound = kInf;
  auto fail = [&](const std::string& why) {
    res.w = best.w;
    res.mu = best.mu;
    res.outer_iterations = k_;
    res.ledger = ledger();
    const auto audit = kkt_residuals(p_, best.w, best.mu);
    return OuterSolveError(why, std::move(res), audit.stationarity, audit.feasibility);
  };

  while (k_ < cfg_.max_outer_iterations) {
    OuterStepReport rep;
    try {
      rep = step();
    } catch (const InnerIterationLimit& e) {
      throw fail("inner solver hit its iteration cap at outer iteration " + std::to_string(k_) + " (residual bound " +
                 std::to_string(e.best_measure()) + ")");
    } catch (const ProxSolverError& e) {
      throw fail(std::string("subproblem solver failed at outer iteration ") + std::to_string(k_) + ": " + e.what());
    }
    res.total_inner_iterations += rep.inner_iterations;

    TraceRecord row = make_trace_record(p_, k_, w_);
    row.step_inf = rep.step_inf;
    row.max_multiplier_delta = rep.max_multiplier_delta;
    row.subproblem_tolerance = rep.tau;
    row.inner_iterations = rep.inner_iterations;
    row.cumulative_inner_iterations = res.total_inner_iterations;
    row.cumulative_rounds = ledger().rounds().size();
    row.cumulative_scalars = ledger().total_scalars();
    res.trace.push_back(std::move(row));

    const OuterState now = state();
    if (cfg_.record_iterates) res.iterates.push_back(now);
    const double bound = std::max(rep.step_inf / cfg_.beta + rep.tau, rep.max_multiplier_delta / cfg_.beta);
    if (bound < best_bound) {
      best_bound = bound;
      best = now;
    }

    if (rep.terminated) {
      transport_->roundtrip(ServerTerminate{w_, digest(mu0_)});
      res.w = now.w;
      res.mu = now.mu;
      res.outer_iterations = k_;
      res.ledger = ledger();
      return res;
    }
  }
  throw fail("outer iteration cap reached (" + std::to_string(cfg_.max_outer_iterations) + ")");
}

OuterResult run_outer(const ProblemSpec& p, const OuterConfig& cfg) {
  FederatedSolver solver(p, cfg);
  return solver.run();
}

}  // namespace fedal
