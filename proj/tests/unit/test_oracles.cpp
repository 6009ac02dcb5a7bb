#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "risee/numerics.hpp"
#include "risee/oracles.hpp"
#include "risee/rng.hpp"

using namespace risee;
using doctest::Approx;

TEST_CASE("exhaustive on-off enumeration and tie rules") {
  SUBCASE("L=1 argmax") {
    auto evaluate = [](const OnOffVector& x) -> std::optional<double> {
      return x.x[0] ? 2.0 : 1.0;
    };
    const auto result = oracles::exhaustive_onoff(evaluate, 1);
    CHECK(result.x.x[0] == 1);
    CHECK(result.value == 2.0);
  }
  SUBCASE("ties go to fewer active, then lexicographic smallest") {
    auto evaluate = [](const OnOffVector& x) -> std::optional<double> {
      const int active = x.active_count();
      if (active == 1) return 5.0;            // (1,0) and (0,1) tie
      if (active == 2) return 5.0;            // more active: loses the tie
      return 1.0;
    };
    const auto result = oracles::exhaustive_onoff(evaluate, 2);
    CHECK(result.x.x == std::vector<std::uint8_t>{0, 1});
  }
  SUBCASE("empty feasible set is reported") {
    auto evaluate = [](const OnOffVector&) -> std::optional<double> {
      return std::nullopt;
    };
    const auto result = oracles::exhaustive_onoff(evaluate, 3);
    CHECK_FALSE(result.any_feasible);
  }
}

TEST_CASE("grid power search") {
  SUBCASE("linear decreasing EE picks p_min") {
    const auto result =
        oracles::grid_power([](double p) { return 10.0 - p; }, 1.0, 5.0, 1000);
    CHECK(result.p == 1.0);
  }
  SUBCASE("two points take the better endpoint") {
    const auto result =
        oracles::grid_power([](double p) { return p; }, 1.0, 5.0, 2);
    CHECK(result.p == 5.0);
    CHECK(result.value == 5.0);
  }
  SUBCASE("finds the closed-form optimum within one grid step") {
    // gbar = 1, mu = 1, P0 = 1+e has its EE optimum at e/W(1) - 1.
    auto ee = [](double p) { return std::log2(1.0 + p) / (p + 1.0 + M_E); };
    const int points = 1000000;
    const auto result = oracles::grid_power(ee, 0.0, 10.0, points);
    const double expected = M_E / numerics::lambert_w0(1.0) - 1.0;
    CHECK(expected == Approx(3.79294).epsilon(1e-5));
    CHECK(std::abs(result.p - expected) <= 10.0 / (points - 1) + 1e-12);
  }
}

TEST_CASE("random phase search") {
  SUBCASE("scalar coherent case approaches the analytic maximum") {
    auto gain = [](const Eigen::VectorXcd& v) { return std::norm(1.0 + v[0]); };
    const auto result = oracles::random_phase_search(gain, 1, 100000, 7);
    CHECK(result.gain >= 4.0 * (1.0 - 1e-3));
    CHECK(result.gain <= 4.0 + 1e-12);
  }
  SUBCASE("a single sample is that draw") {
    auto gain = [](const Eigen::VectorXcd& v) { return std::norm(v[0]); };
    const auto a = oracles::random_phase_search(gain, 2, 1, 9);
    const auto b = oracles::random_phase_search(gain, 2, 1, 9);
    CHECK(a.v == b.v);
  }
}

TEST_CASE("KKT residual audit") {
  numerics::SolverOptions options;

  auto quadratic_problem = [](const Eigen::MatrixXd& h, const Eigen::VectorXd& target) {
    auto p = numerics::ConvexSubproblem::unbounded(static_cast<int>(target.size()));
    p.objective.value = [h, target](const Eigen::VectorXd& x) {
      const Eigen::VectorXd d = x - target;
      return -0.5 * d.dot(h * d);
    };
    p.objective.gradient = [h, target](const Eigen::VectorXd& x) {
      return (-h * (x - target)).eval();
    };
    p.objective.hessian = [h](const Eigen::VectorXd&) { return (-h).eval(); };
    return p;
  };

  SUBCASE("interior unconstrained optimum has a tiny residual") {
    const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd target(2);
    target << 0.25, -0.5;
    auto p = quadratic_problem(h, target);
    CHECK(oracles::kkt_residual(p, target) < 1e-8);
  }
  SUBCASE("the residual grows with the perturbation") {
    const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(2, 2);
    Eigen::VectorXd target(2);
    target << 0.0, 0.0;
    auto p = quadratic_problem(h, target);
    double prev = oracles::kkt_residual(p, target);
    for (double eps : {1e-6, 1e-4, 1e-2}) {
      const double r =
          oracles::kkt_residual(p, Eigen::VectorXd::Constant(2, eps));
      CHECK(r > prev);
      prev = r;
    }
  }
  SUBCASE("solve_convex outputs satisfy the audited contract") {
    auto stream = rng::substream(77, rng::StreamTag::kTrial);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 2 + static_cast<int>(stream.uniform(0.0, 4.0));
      Eigen::MatrixXd a(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) a(r, c) = stream.normal();
      }
      const Eigen::MatrixXd h =
          a * a.transpose() + Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd target(n);
      for (int r = 0; r < n; ++r) target[r] = stream.uniform(-2.0, 2.0);
      auto p = quadratic_problem(h, target);
      p.lower = Eigen::VectorXd::Constant(n, -1.0);
      p.upper = Eigen::VectorXd::Constant(n, 1.0);
      const auto result =
          numerics::solve_convex(p, Eigen::VectorXd::Zero(n), options);
      REQUIRE(result.converged);
      REQUIRE(oracles::kkt_residual(p, result.point, options.kkt_tolerance * 100) <=
              options.kkt_tolerance * 100);
    }
  }
}
