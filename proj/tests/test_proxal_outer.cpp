#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedal/kkt_audit.hpp"
#include "fedal/problem_library.hpp"
#include "fedal/proxal_outer.hpp"
#include "support/oracles.hpp"

using namespace fedal;
using fedal::testing::direct_proximal_al;
using fedal::testing::fd_gradient;
using fedal::testing::random_spd;
using fedal::testing::random_vec;

namespace {

std::shared_ptr<QuadraticFunction> centered(Index d, double center) {
  return std::make_shared<QuadraticFunction>(Mat::Identity(d, d), Vec::Constant(d, -center),
                                             0.5 * static_cast<double>(d) * center * center);
}

std::shared_ptr<LinearConstraints> upper_bound(double bound) {
  // w - bound <= 0
  return std::make_shared<LinearConstraints>(Mat::Ones(1, 1), Vec::Constant(1, -bound), Cone::NonnegativeOrthant);
}

/// c(w) = w^2 - 1 <= 0 in one dimension.
std::shared_ptr<CallableConstraints> unit_ball_1d() {
  return std::make_shared<CallableConstraints>(1, 1, Cone::NonnegativeOrthant, [](const Vec& w, Vec& v, Mat& j) {
    v = Vec::Constant(1, w[0] * w[0] - 1.0);
    j = Mat::Constant(1, 1, 2.0 * w[0]);
  });
}

/// Random convex problem: quadratic objectives, affine inequality blocks.
ProblemSpec random_problem(Index d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ClientTerms> clients;
  for (std::size_t i = 0; i < n; ++i) {
    auto f = std::make_shared<QuadraticFunction>(random_spd(d, rng, 0.1, 1.0), random_vec(d, rng));
    Mat C(2, d);
    C.row(0) = random_vec(d, rng).transpose();
    C.row(1) = random_vec(d, rng).transpose();
    auto c = std::make_shared<LinearConstraints>(C, -Vec::Ones(2), Cone::NonnegativeOrthant);
    clients.push_back({f, c});
  }
  Mat C0 = random_vec(d, rng).transpose();
  auto c0 = std::make_shared<LinearConstraints>(C0, Vec::Constant(1, -0.5), Cone::ZeroCone);
  return ProblemSpec(d, std::move(clients), c0);
}

MultiplierState random_multipliers(const ProblemSpec& p, std::mt19937_64& rng) {
  MultiplierState mu;
  for (std::size_t i = 0; i < p.num_blocks(); ++i) {
    Vec v = random_vec(p.block(i).size(), rng);
    if (p.block(i).cone() == Cone::NonnegativeOrthant) v = v.cwiseAbs();
    mu.blocks.push_back(v);
  }
  return mu;
}

OuterConfig small_config(double beta = 10.0) {
  OuterConfig cfg;
  cfg.eps1 = 1e-4;
  cfg.eps2 = 1e-4;
  cfg.beta = beta;
  cfg.s_bar = 1e-3;
  cfg.rho_rule = {RhoRule::Kind::Constant, 1.0};
  return cfg;
}

}  // namespace

TEST_CASE("merit gradient matches finite differences") {
  SUBCASE("server block w^2 - 1 with its closed-form gradient") {
    const auto block = unit_ball_1d();
    const double beta = 10.0, mu = 0.4;
    const Vec anchor = Vec::Constant(1, 0.3);
    const MeritFunction m(nullptr, *block, Vec::Constant(1, mu), beta, anchor, 2);
    for (const double x : {-1.5, -0.2, 0.0, 0.7, 1.3}) {
      const Vec w = Vec::Constant(1, x);
      const double shifted = std::max(0.0, mu + beta * (x * x - 1.0));
      const double expected = shifted * 2.0 * x + (x - 0.3) / (3.0 * beta);
      CHECK(m.gradient(w)[0] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(fd_gradient(m, w)[0] == doctest::Approx(expected).epsilon(1e-6));
    }
  }
  SUBCASE("random client merits") {
    const auto p = random_problem(6, 3, 3);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const auto merits = build_merits(p, random_vec(6, rng), random_multipliers(p, rng), 5.0);
      for (const auto& m : merits) {
        const Vec w = random_vec(6, rng);
        const Vec g = m.gradient(w);
        CHECK(inf_norm(Vec(g - fd_gradient(m, w))) <= 1e-5 * std::max(1.0, inf_norm(g)));
      }
    }
  }
}

TEST_CASE("merits are strongly convex with modulus 1/((n+1) beta)") {
  const auto p = random_problem(5, 4, 9);
  std::mt19937_64 rng(2);
  const double beta = 7.0;
  const auto merits = build_merits(p, random_vec(5, rng), random_multipliers(p, rng), beta);
  for (const auto& m : merits) {
    CHECK(m.strong_convexity() == doctest::Approx(1.0 / (5.0 * beta)));
    for (int trial = 0; trial < 20; ++trial) {
      const Vec x = random_vec(5, rng), y = random_vec(5, rng);
      const double lhs = (m.gradient(x) - m.gradient(y)).dot(x - y);
      CHECK(lhs >= m.strong_convexity() * (x - y).squaredNorm() * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("sum of merits equals the proximal AL objective") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto p = random_problem(4, 3, seed);
    std::mt19937_64 rng(seed + 100);
    const Vec anchor = random_vec(4, rng);
    const auto mu = random_multipliers(p, rng);
    const auto merits = build_merits(p, anchor, mu, 3.0);
    for (int trial = 0; trial < 5; ++trial) {
      const Vec w = random_vec(4, rng);
      double sum = 0.0;
      for (const auto& m : merits) sum += m.value(w);
      const double direct = direct_proximal_al(p, w, mu, 3.0, anchor);
      CHECK(std::abs(sum - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("build_merits rejects cone-infeasible multipliers") {
  const auto p = random_problem(3, 2, 1);
  auto mu = MultiplierState::zeros(p);
  mu.blocks[1][0] = -1.0;
  CHECK_THROWS_AS(build_merits(p, Vec::Zero(3), mu, 1.0), std::invalid_argument);
}

TEST_CASE("subproblem tolerance schedule and multiplier update") {
  OuterConfig cfg;
  cfg.s_bar = 1e-3;
  CHECK(cfg.subproblem_tolerance(0) == doctest::Approx(1e-3));
  CHECK(cfg.subproblem_tolerance(2) == doctest::Approx(1.1111e-4).epsilon(1e-4));
  cfg.fixed_subproblem_tolerance = 1e-10;
  CHECK(cfg.subproblem_tolerance(7) == 1e-10);

  CHECK(update_multiplier(Vec::Constant(1, 0.3), Vec::Constant(1, -0.5), 10.0, Cone::NonnegativeOrthant)[0] == 0.0);
  CHECK(update_multiplier(Vec::Constant(1, 0.3), Vec::Constant(1, 0.2), 10.0, Cone::NonnegativeOrthant)[0] ==
        doctest::Approx(2.3));
  CHECK(update_multiplier(Vec::Constant(1, 0.3), Vec::Constant(1, -0.5), 10.0, Cone::ZeroCone)[0] ==
        doctest::Approx(-4.7));
}

TEST_CASE("outer_check_termination") {
  const std::vector<double> small{0.0, 5e-3}, large{0.0, 2e-2};
  CHECK(outer_check_termination(1e-4, 1e-6, small, 10.0, 1e-3, 1e-3));
  CHECK_FALSE(outer_check_termination(1e-4, 1e-6, large, 10.0, 1e-3, 1e-3));
  CHECK_FALSE(outer_check_termination(1e-2, 1e-6, small, 10.0, 1e-3, 1e-3));
  CHECK_FALSE(outer_check_termination(0.0, 2e-3, small, 10.0, 1e-3, 1e-3));
}

TEST_CASE("rho rule") {
  const auto p = random_problem(3, 2, 1);
  CHECK(RhoRule{RhoRule::Kind::Constant, 0.5}.resolve(p) == std::vector<double>{0.5, 0.5});
  CHECK(RhoRule{RhoRule::Kind::PerSample, 0.5}.resolve(p) == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS((RhoRule{RhoRule::Kind::Constant, 0.0}.resolve(p)), std::invalid_argument);
}

TEST_CASE("one-dimensional problem: min (w-2)^2/2 s.t. w <= 1") {
  SUBCASE("constraint on the client") {
    const ProblemSpec p(1, {{centered(1, 2.0), upper_bound(1.0)}});
    const auto res = run_outer(p, small_config());
    CHECK(res.w[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(res.mu.blocks[1][0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(assert_output_contract(p, res.w, res.mu, 1e-4, 1e-4).pass);
  }
  SUBCASE("constraint on the server") {
    const ProblemSpec p(1, {{centered(1, 2.0), nullptr}}, upper_bound(1.0));
    const auto res = run_outer(p, small_config());
    CHECK(res.w[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(res.mu.blocks[0][0] == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("random convex problems: audit passes and multipliers stay in the dual cone") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto p = random_problem(5, 3, seed);
    auto cfg = small_config(5.0);
    cfg.record_iterates = true;
    const auto res = run_outer(p, cfg);
    CHECK(assert_output_contract(p, res.w, res.mu, cfg.eps1, cfg.eps2).pass);
    CHECK(res.trace.size() == static_cast<std::size_t>(res.outer_iterations) + 1);
    CHECK(res.iterates.size() == res.trace.size());
    for (const auto& s : res.iterates) CHECK(s.mu.cone_feasible(p));
    CHECK_FALSE(res.heuristic_regime);
    for (std::size_t k = 1; k < res.trace.size(); ++k) {
      CHECK(res.trace[k].cumulative_rounds > res.trace[k - 1].cumulative_rounds);
      CHECK(res.trace[k].subproblem_tolerance == doctest::Approx(cfg.subproblem_tolerance(static_cast<int>(k) - 1)));
    }
  }
}

TEST_CASE("communication pattern of the federated driver") {
  const auto p = random_problem(4, 3, 7);
  const auto res = run_outer(p, small_config(5.0));
  const auto& led = res.ledger;
  const auto K = static_cast<std::size_t>(res.outer_iterations);
  CHECK(led.rounds_with_phase(Phase::Outer) == K);
  CHECK(led.rounds_with_phase(Phase::InnerInit) == K);
  CHECK(led.rounds_with_phase(Phase::Inner) == static_cast<std::size_t>(res.total_inner_iterations));
  for (const auto& r : led.rounds()) {
    CHECK(r.broadcasts == 1);
    if (r.round) CHECK(r.reports == 3);
    if (r.round && r.round->phase == Phase::Inner) CHECK(r.scalars == 4 + 3 * 5);
    if (r.round && r.round->phase == Phase::Outer) CHECK(r.scalars == 4 + 3);
  }
  CHECK_FALSE(led.rounds().back().round.has_value());
}

TEST_CASE("step-wise driving matches run_outer") {
  const auto p = random_problem(4, 2, 12);
  const auto cfg = small_config(5.0);
  const auto whole = run_outer(p, cfg);
  FederatedSolver solver(p, cfg);
  OuterStepReport rep;
  do {
    rep = solver.step();
  } while (!rep.terminated);
  CHECK(solver.k() == whole.outer_iterations);
  CHECK(solver.w() == whole.w);
  const auto s = solver.state();
  for (std::size_t i = 0; i < p.num_blocks(); ++i) CHECK(s.mu.blocks[i] == whole.mu.blocks[i]);
}

TEST_CASE("iteration cap raises OuterSolveError with a partial trace") {
  const ProblemSpec p(1, {{centered(1, 2.0), upper_bound(1.0)}});
  auto cfg = small_config();
  cfg.max_outer_iterations = 1;
  try {
    run_outer(p, cfg);
    FAIL("expected OuterSolveError");
  } catch (const OuterSolveError& e) {
    CHECK(e.partial().trace.size() == 2);
    CHECK(e.partial().outer_iterations == 1);
    CHECK(std::isfinite(e.audit_stationarity()));
  }
}

TEST_CASE("configuration validation") {
  const ProblemSpec p(1, {{centered(1, 2.0), upper_bound(1.0)}});
  auto cfg = small_config();
  cfg.eps1 = 0.0;
  CHECK_THROWS_AS(run_outer(p, cfg), std::invalid_argument);
  cfg = small_config();
  cfg.beta = -1.0;
  CHECK_THROWS_AS(run_outer(p, cfg), std::invalid_argument);
  cfg = small_config();
  cfg.w0 = Vec::Zero(2);
  CHECK_THROWS_AS(run_outer(p, cfg), DimensionError);
}

TEST_CASE("nonconvex blocks set the heuristic flag") {
  auto ball = unit_ball_1d();
  auto nonconvex = std::make_shared<CallableConstraints>(
      1, 1, Cone::NonnegativeOrthant,
      [](const Vec& w, Vec& v, Mat& j) {
        v = Vec::Constant(1, 1.0 - w[0] * w[0] - 0.75);
        j = Mat::Constant(1, 1, -2.0 * w[0]);
      },
      false);
  const ProblemSpec p(1, {{centered(1, 0.2), ball}, {centered(1, 0.2), nonconvex}});
  const auto res = run_outer(p, small_config());
  CHECK(res.heuristic_regime);
  CHECK(std::abs(res.w[0]) >= 0.5 - 1e-3);
}
