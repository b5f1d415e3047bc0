#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fedal/prox_solver.hpp"
#include "support/oracles.hpp"

using namespace fedal;
using fedal::testing::random_spd;
using fedal::testing::random_vec;

TEST_CASE("pure quadratic pull reaches its center") {
  Vec a(2);
  a << 3.0, -1.0;
  const QuadraticFunction g(Mat::Identity(2, 2), -a);
  const ZeroTerm h;
  const auto cert = solve_composite({g, h, 1.0, Vec::Zero(2)}, 1e-8);
  CHECK(inf_norm(cert.point - a) <= 1e-8);
  CHECK(cert.residual <= 1e-8);
}

TEST_CASE("positive definite quadratic matches a direct linear solve") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Index d = 8 + trial;
    const Mat A = random_spd(d, rng, 0.1, 5.0);
    const Vec b = random_vec(d, rng);
    const QuadraticFunction g(A, b);
    const ZeroTerm h;
    const auto cert = solve_composite({g, h, 0.1, random_vec(d, rng)}, 1e-10);
    const Vec x_star = A.llt().solve(-b);
    CHECK(inf_norm(cert.point - x_star) <= 1e-10 / 0.1 * std::sqrt(static_cast<double>(d)));
  }
}

TEST_CASE("active bound: certificate is zero at the constrained minimizer") {
  const QuadraticFunction g(Mat::Identity(1, 1), Vec::Constant(1, 1.0));  // 0.5 (x+1)^2 - 0.5
  const BoxIndicator h(Vec::Zero(1), Vec::Constant(1, kInf));
  const auto cert = solve_composite({g, h, 1.0, Vec::Constant(1, 2.0)}, 1e-9);
  CHECK(cert.point[0] == doctest::Approx(0.0));
  CHECK(cert.residual <= 1e-12);
}

TEST_CASE("L1 composite matches soft thresholding") {
  std::mt19937_64 rng(9);
  const Index d = 10;
  const Vec a = random_vec(d, rng, 2.0);
  const QuadraticFunction g(2.0 * Mat::Identity(d, d), -2.0 * a);  // ||x - a||^2 + const
  const L1Term h(0.8);
  const auto cert = solve_composite({g, h, 2.0, Vec::Zero(d)}, 1e-10);
  // argmin ||x-a||^2 + 0.8 ||x||_1 = soft(a, 0.4)
  const Vec expect = a.unaryExpr([](double v) { return std::copysign(std::max(std::abs(v) - 0.4, 0.0), v); });
  CHECK(inf_norm(cert.point - expect) <= 1e-9);
}

TEST_CASE("errors") {
  const QuadraticFunction g(Mat::Identity(2, 2), Vec::Zero(2));
  const ZeroTerm h;
  CHECK_THROWS_AS(solve_composite({g, h, 1.0, Vec::Ones(2)}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_composite({g, h, 1.0, Vec::Ones(3)}, 1e-6), DimensionError);

  const CallableFunction nan_fn(1, [](const Vec&, Vec& grad) {
    grad = Vec::Constant(1, std::nan(""));
    return 0.0;
  });
  CHECK_THROWS_AS(solve_composite({nan_fn, h, 1.0, Vec::Zero(1)}, 1e-6), std::domain_error);

  std::mt19937_64 rng(1);
  const QuadraticFunction hard(random_spd(30, rng, 1e-3, 1.0), random_vec(30, rng));
  ProxSolverOptions opt;
  opt.max_iterations = 3;
  try {
    solve_composite({hard, h, 1e-3, Vec::Zero(30)}, 1e-12, opt);
    FAIL("expected the iteration cap");
  } catch (const ProxSolverError& e) {
    const auto& best = e.best();
    CHECK(best.point.size() == 30);
    CHECK(best.residual == doctest::Approx(inf_norm(hard.gradient(best.point))));
  }
}

TEST_CASE("property: certificate soundness for h = 0") {
  std::mt19937_64 rng(41);
  const ZeroTerm h;
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 3 + trial;
    const QuadraticFunction g(random_spd(d, rng, 0.2, 3.0), random_vec(d, rng));
    const auto cert = solve_composite({g, h, 0.2, random_vec(d, rng)}, 1e-7);
    CHECK(std::abs(inf_norm(g.gradient(cert.point)) - cert.residual) <= 1e-12);
    CHECK(cert.residual <= 1e-7);
  }
}

TEST_CASE("property: linear convergence and monotone objective") {
  std::mt19937_64 rng(77);
  const L1Term l1(0.1);
  const ZeroTerm zero;
  for (int trial = 0; trial < 6; ++trial) {
    const Index d = 20;
    const QuadraticFunction g(random_spd(d, rng, 0.05, 1.0), random_vec(d, rng, 3.0));
    const SimpleTerm& h = trial % 2 == 0 ? static_cast<const SimpleTerm&>(zero) : l1;
    ProxSolverTrace trace;
    solve_composite({g, h, 0.05, random_vec(d, rng)}, 1e-11, {}, &trace);

    for (std::size_t t = 1; t < trace.objectives.size(); ++t)
      CHECK(trace.objectives[t] <= trace.objectives[t - 1] + 1e-12);

    // Residual halves within a fixed window T over the whole run.
    const auto& r = trace.residuals;
    REQUIRE(r.size() > 2);
    const double decades = std::log10(r.front() / r.back());
    CHECK(decades >= 5.0);
    std::size_t T = 1;
    auto window_ok = [&](std::size_t win) {
      for (std::size_t t = 0; t + win < r.size(); ++t)
        if (r[t + win] > 0.5 * r[t]) return false;
      return true;
    };
    while (T < r.size() && !window_ok(T)) ++T;
    CAPTURE(T);
    CAPTURE(r.size());
    CHECK(T < r.size() / 4);
  }
}
