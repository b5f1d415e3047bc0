#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedal/centralized.hpp"
#include "fedal/kkt_audit.hpp"
#include "fedal/problem_library.hpp"
#include "support/oracles.hpp"

using namespace fedal;
using fedal::testing::direct_proximal_al;
using fedal::testing::fd_gradient;
using fedal::testing::random_vec;

namespace {

OuterConfig lcqp_config() {
  OuterConfig cfg;
  cfg.eps1 = 1e-4;
  cfg.eps2 = 1e-4;
  cfg.beta = 10.0;
  cfg.s_bar = 0.1;
  cfg.rho_rule = {RhoRule::Kind::Constant, 1.0};
  return cfg;
}

}  // namespace

TEST_CASE("ProximalLagrangian equals the direct definition") {
  const auto inst = generate_lcqp(8, 2, 2, 4);
  const auto p = lcqp_problem(inst);
  std::mt19937_64 rng(1);
  MultiplierState mu;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) mu.blocks.push_back(random_vec(p.block(i).size(), rng));
  const Vec anchor = random_vec(8, rng);
  const ProximalLagrangian L(p, mu, 10.0, anchor);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec w = random_vec(8, rng);
    CHECK(L.value(w) == doctest::Approx(direct_proximal_al(p, w, mu, 10.0, anchor)).epsilon(1e-12));
    CHECK(inf_norm(Vec(L.gradient(w) - fd_gradient(L, w))) <= 1e-5);
  }
}

TEST_CASE("one-dimensional problem") {
  auto f = std::make_shared<QuadraticFunction>(Mat::Identity(1, 1), Vec::Constant(1, -2.0), 2.0);
  auto c = std::make_shared<LinearConstraints>(Mat::Ones(1, 1), Vec::Constant(1, -1.0), Cone::NonnegativeOrthant);
  const ProblemSpec p(1, {{f, c}});
  const auto res = run_centralized(p, lcqp_config());
  CHECK(res.w[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(res.mu.blocks[1][0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(res.ledger.rounds().empty());
}

TEST_CASE("LCQP instances agree with the KKT oracle") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto inst = generate_lcqp(20, 3, 2, seed);
    const auto p = lcqp_problem(inst);
    const auto oracle = lcqp_oracle(inst);
    const auto res = run_centralized(p, lcqp_config());
    CHECK(assert_output_contract(p, res.w, res.mu, 1e-4, 1e-4).pass);
    CHECK(inf_norm(Vec(res.w - oracle.w)) <= 1e-2);
    CHECK(std::abs(inst.objective(res.w) - oracle.objective) <= 1e-3 * (1.0 + std::abs(oracle.objective)));
    CHECK(res.trace.size() == static_cast<std::size_t>(res.outer_iterations) + 1);
  }
}

TEST_CASE("n = 1 with exact subproblems matches the federated driver") {
  const auto inst = generate_lcqp(10, 1, 2, 3);
  const auto p = lcqp_problem(inst);
  auto cfg = lcqp_config();
  cfg.fixed_subproblem_tolerance = 1e-10;
  cfg.record_iterates = true;
  const auto fed = run_outer(p, cfg);
  const auto cen = run_centralized(p, cfg);
  REQUIRE(fed.iterates.size() == cen.iterates.size());
  for (std::size_t k = 0; k < fed.iterates.size(); ++k) {
    CHECK(inf_norm(Vec(fed.iterates[k].w - cen.iterates[k].w)) <= 1e-6);
    CHECK(inf_norm(Vec(fed.iterates[k].mu.stacked() - cen.iterates[k].mu.stacked())) <= 1e-6);
  }
  const auto rf = kkt_residuals(p, fed.w, fed.mu);
  const auto rc = kkt_residuals(p, cen.w, cen.mu);
  CHECK(std::abs(rf.stationarity - rc.stationarity) <= 1e-6);
  CHECK(std::abs(rf.feasibility - rc.feasibility) <= 1e-6);
}

TEST_CASE("iteration cap raises OuterSolveError") {
  const auto inst = generate_lcqp(10, 2, 2, 1);
  auto cfg = lcqp_config();
  cfg.max_outer_iterations = 1;
  cfg.eps1 = cfg.eps2 = 1e-8;
  const auto p = lcqp_problem(inst);
  CHECK_THROWS_AS(run_centralized(p, cfg), OuterSolveError);
}
