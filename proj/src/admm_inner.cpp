#include "fedal/admm_inner.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace fedal {
namespace {

/// phi_{i,t}(u) = P_i(u) + <lambda, u - w> + rho/2 ||u - w||^2.
class ClientSubproblem final : public SmoothFunction {
 public:
  ClientSubproblem(const SmoothFunction& merit, const Vec& lambda, const Vec& w, double rho)
      : merit_(merit), lambda_(lambda), w_(w), rho_(rho) {}

  Index dimension() const override { return w_.size(); }
  double value_and_gradient(const Vec& u, Vec& grad) const override {
    const double v = merit_.value_and_gradient(u, grad);
    const Vec diff = u - w_;
    grad += lambda_ + rho_ * diff;
    return v + lambda_.dot(diff) + 0.5 * rho_ * diff.squaredNorm();
  }

 private:
  const SmoothFunction& merit_;
  const Vec& lambda_;
  const Vec& w_;
  double rho_;
};

/// P_0(w) + sum_i rho_i/2 ||u~_i - w||^2.
class ServerSubproblem final : public SmoothFunction {
 public:
  ServerSubproblem(const SmoothFunction& merit, std::span<const Vec> shifted, std::span<const double> rho)
      : merit_(merit), shifted_(shifted), rho_(rho) {}

  Index dimension() const override { return merit_.dimension(); }
  double value_and_gradient(const Vec& w, Vec& grad) const override {
    double v = merit_.value_and_gradient(w, grad);
    for (std::size_t i = 0; i < shifted_.size(); ++i) {
      const Vec diff = w - shifted_[i];
      grad += rho_[i] * diff;
      v += 0.5 * rho_[i] * diff.squaredNorm();
    }
    return v;
  }

 private:
  const SmoothFunction& merit_;
  std::span<const Vec> shifted_;
  std::span<const double> rho_;
};

}  // namespace

void InnerConfig::validate(std::size_t num_clients) const {
  if (!(tolerance > 0.0)) throw std::invalid_argument("InnerConfig: tolerance must be positive");
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("InnerConfig: q must lie in (0, 1)");
  if (rho.size() != num_clients)
    throw std::invalid_argument("InnerConfig: expected " + std::to_string(num_clients) + " rho values, got " +
                                std::to_string(rho.size()));
  for (double r : rho)
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("InnerConfig: rho must be positive");
  if (max_iterations < 1) throw std::invalid_argument("InnerConfig: max_iterations must be >= 1");
  if (!(min_subproblem_tolerance > 0.0))
    throw std::invalid_argument("InnerConfig: min_subproblem_tolerance must be positive");
  if (forced_subproblem_tolerance && !(*forced_subproblem_tolerance > 0.0))
    throw std::invalid_argument("InnerConfig: forced tolerance must be positive");
}

double InnerConfig::subproblem_tolerance(int t) const {
  return forced_subproblem_tolerance ? *forced_subproblem_tolerance : std::max(std::pow(q, t), min_subproblem_tolerance);
}

ClientAdmmState client_init(const SmoothFunction& merit, const Vec& anchor, double rho) {
  Vec g;
  const double v = merit.value_and_gradient(anchor, g);
  if (!std::isfinite(v) || !g.allFinite()) throw std::domain_error("client_init: non-finite gradient at anchor");
  ClientAdmmState s;
  s.rho = rho;
  s.u = anchor;
  s.lambda = -g;
  s.shifted = anchor - g / rho;
  s.residual = 0.0;
  return s;
}

ClientAdmmState client_step(const SmoothFunction& merit, double sigma, const ClientAdmmState& state,
                            const Vec& w_next, double eps, const ProxSolverOptions& prox) {
  require_dimension(w_next.size(), state.u.size(), "client_step");
  const ClientSubproblem phi(merit, state.lambda, w_next, state.rho);
  static const ZeroTerm zero;
  const auto cert = solve_composite({phi, zero, sigma + state.rho, state.u}, eps, prox);

  ClientAdmmState next;
  next.rho = state.rho;
  next.u = cert.point;
  next.lambda = state.lambda + state.rho * (next.u - w_next);
  next.shifted = next.u + next.lambda / state.rho;
  const Vec grad_at_w = phi.gradient(w_next);
  next.residual = inf_norm(Vec(grad_at_w - state.rho * (w_next - state.u)));
  return next;
}

StationarityCertificate server_step(const SmoothFunction& server_merit, const SimpleTerm& h, double sigma,
                                    std::span<const Vec> shifted, std::span<const double> rho, const Vec& start,
                                    double eps, const ProxSolverOptions& prox) {
  if (shifted.size() != rho.size()) throw std::invalid_argument("server_step: shifted/rho size mismatch");
  double total_rho = 0.0;
  for (double r : rho) total_rho += r;
  const ServerSubproblem phi(server_merit, shifted, rho);
  return solve_composite({phi, h, sigma + total_rho, start}, eps, prox);
}

bool inner_check_termination(double eps, std::span<const double> client_residuals, double tau) {
  double total = eps;
  for (double r : client_residuals) total += r;
  return total <= tau;
}

InnerState inner_init(const InnerModel& model, const Vec& anchor, const InnerConfig& cfg) {
  cfg.validate(model.client_merits.size());
  InnerState s;
  s.w = anchor;
  s.clients.reserve(model.client_merits.size());
  for (std::size_t i = 0; i < model.client_merits.size(); ++i)
    s.clients.push_back(client_init(*model.client_merits[i], anchor, cfg.rho[i]));
  s.t = 0;
  s.next_tolerance = cfg.subproblem_tolerance(0);
  return s;
}

AdmmClient::AdmmClient(std::uint64_t id, double rho, double sigma, InnerConfig cfg)
    : id_(id), rho_(rho), sigma_(sigma), cfg_(std::move(cfg)) {
  if (!(rho_ > 0.0)) throw std::invalid_argument("AdmmClient: rho must be positive");
}

std::optional<Message> AdmmClient::on_message(const Message& msg) {
  ++processed_;
  if (const auto* b = std::get_if<BroadcastWeights>(&msg)) {
    if (b->round.phase == Phase::InnerInit) {
      merit_ = &prepare_merit(b->w, b->round);
      state_ = client_init(*merit_, b->w, rho_);
      return ClientInnerReport{id_, state_.shifted, 0.0};
    }
    if (b->round.phase == Phase::Inner) {
      if (!merit_) throw TransportError("AdmmClient: inner round before initialization");
      const double eps = cfg_.subproblem_tolerance(static_cast<int>(b->round.inner));
      state_ = client_step(*merit_, sigma_, state_, b->w, eps, cfg_.prox);
      return ClientInnerReport{id_, state_.shifted, state_.residual};
    }
  }
  return on_other(msg);
}

std::optional<Message> AdmmClient::on_other(const Message& msg) {
  if (std::holds_alternative<ServerTerminate>(msg)) return std::nullopt;
  throw TransportError("AdmmClient: unsupported message");
}

InnerResult run_inner_server(const SmoothFunction& server_merit, const SimpleTerm& h, double sigma,
                             const Vec& anchor, const InnerConfig& cfg, Transport& transport,
                             std::uint64_t outer_round, const std::function<void(int, const Vec&)>& after_round) {
  const std::size_t n = transport.num_clients();
  cfg.validate(n);
  std::vector<Vec> shifted(n);
  std::vector<double> residuals(n, 0.0);

  auto collect = [&](const std::vector<Message>& replies) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = std::get<ClientInnerReport>(replies.at(i));
      shifted[i] = r.shifted_weight;
      residuals[i] = r.residual;
    }
  };

  collect(transport.roundtrip(BroadcastWeights{anchor, {outer_round, 0, Phase::InnerInit}}));

  InnerResult result;
  Vec w = anchor;
  Vec best = anchor;
  double best_measure = kInf;
  std::size_t broadcasts = 0;
  for (int t = 0; t < cfg.max_iterations; ++t) {
    const double eps = cfg.subproblem_tolerance(t);
    const auto cert = server_step(server_merit, h, sigma, shifted, cfg.rho, w, eps, cfg.prox);
    w = cert.point;
    collect(transport.roundtrip(BroadcastWeights{w, {outer_round, static_cast<std::uint64_t>(t), Phase::Inner}}));
    ++broadcasts;

    double sum = 0.0;
    for (double r : residuals) sum += r;
    result.trace.push_back({t, eps, sum, broadcasts, broadcasts * n});
    if (after_round) after_round(t, w);
    if (eps + sum < best_measure) {
      best_measure = eps + sum;
      best = w;
    }
    if (inner_check_termination(eps, residuals, cfg.tolerance)) {
      result.w = w;
      result.iterations = t + 1;
      result.measure = eps + sum;
      return result;
    }
  }
  throw InnerIterationLimit(best, best_measure, std::move(result.trace));
}

InnerResult run_inner(const InnerModel& model, const Vec& anchor, const InnerConfig& cfg, const InnerObserver& observer,
                      CommLedger* ledger_out) {
  const std::size_t n = model.client_merits.size();
  cfg.validate(n);
  std::vector<std::unique_ptr<FixedMeritClient>> clients;
  std::vector<ClientEndpoint*> endpoints;
  for (std::size_t i = 0; i < n; ++i) {
    clients.push_back(std::make_unique<FixedMeritClient>(i + 1, *model.client_merits[i], cfg.rho[i],
                                                         model.strong_convexity, cfg));
    endpoints.push_back(clients.back().get());
  }
  InProcessTransport transport(endpoints, cfg.parallel_clients);

  std::function<void(int, const Vec&)> hook;
  if (observer) {
    hook = [&](int t, const Vec& w) {
      std::vector<ClientAdmmState> states;
      states.reserve(n);
      for (const auto& c : clients) states.push_back(c->admm_state());
      observer(t, w, states);
    };
  }
  try {
    auto result = run_inner_server(model.server_merit, model.simple, model.strong_convexity, anchor, cfg, transport, 0,
                                   hook);
    if (ledger_out) *ledger_out = transport.ledger();
    return result;
  } catch (...) {
    if (ledger_out) *ledger_out = transport.ledger();
    throw;
  }
}

}  // namespace fedal
