#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "risee/errors.hpp"
#include "risee/oracles.hpp"
#include "risee/single_user.hpp"
#include "test_instances.hpp"

using namespace risee;
using doctest::Approx;
using std::complex;

TEST_CASE("MRT beamformer") {
  SUBCASE("real axis") {
    Eigen::VectorXcd e(2);
    e << 1.0, 0.0;
    const auto w = single_user::mrt_beamformer(e, 4.0);
    CHECK(w[0] == complex<double>(2.0, 0.0));
    CHECK(w[1] == complex<double>(0.0, 0.0));
  }
  SUBCASE("norm squared equals the power") {
    auto stream = rng::substream(3, rng::StreamTag::kTrial);
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXcd e(4);
      for (int m = 0; m < 4; ++m) e[m] = stream.cnormal();
      const double p = stream.uniform(0.1, 20.0);
      CHECK(single_user::mrt_beamformer(e, p).squaredNorm() ==
            Approx(p).epsilon(1e-12));
    }
  }
  SUBCASE("unit vector is preserved") {
    Eigen::VectorXcd e(2);
    e << complex<double>(M_SQRT1_2, 0.0), complex<double>(0.0, M_SQRT1_2);
    const auto w = single_user::mrt_beamformer(e, 1.0);
    CHECK(std::abs(w[0] - e[0]) < 1e-14);
    CHECK(std::abs(w[1] - e[1]) < 1e-14);
  }
  SUBCASE("zero channel is an error") {
    CHECK_THROWS_AS(single_user::mrt_beamformer(Eigen::VectorXcd::Zero(3), 1.0),
                    std::domain_error);
  }
}

TEST_CASE("SCA phase step (scalar hand values)") {
  Eigen::VectorXcd g(1), v(1);
  Eigen::MatrixXcd cascade(1, 1);

  SUBCASE("g=1, U=j moves the phase to pi/4, then the gain to 2+sqrt(2)") {
    g << 1.0;
    cascade << complex<double>(0.0, 1.0);
    v << 1.0;
    const auto next = single_user::sca_phase_step(v, g, cascade);
    CHECK(std::arg(next[0]) == Approx(M_PI / 4).epsilon(1e-12));
    const double gain = std::norm((g + cascade.adjoint() * next)[0]);
    CHECK(gain == Approx(2.0 + std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("fixed point at the optimum") {
    g << 1.0;
    cascade << 1.0;
    v << 1.0;
    const auto next = single_user::sca_phase_step(v, g, cascade);
    CHECK(std::abs(next[0] - v[0]) < 1e-15);
  }
  SUBCASE("zero coefficient keeps the previous phase") {
    g << 0.0;
    cascade << 0.0;
    v << std::polar(1.0, 1.234);
    const auto next = single_user::sca_phase_step(v, g, cascade);
    CHECK(next[0] == v[0]);
  }
}

TEST_CASE("phase optimization (Algorithm-1 style loop)") {
  numerics::SolverOptions options;

  SUBCASE("scalar instance converges to the analytic maximum") {
    Eigen::VectorXcd g(1), v0(1);
    Eigen::MatrixXcd cascade(1, 1);
    g << 1.0;
    cascade << complex<double>(0.0, 1.0);
    v0 << 1.0;
    const auto result = single_user::optimize_phases(g, cascade, v0, options);
    // The loop stops at 1e-6 relative gain change, so the gain is within
    // ~1e-6 of 4 and the phase within ~1e-3 of the analytic argmax v = j.
    CHECK(result.gains.back() == Approx(4.0).epsilon(1e-5));
    CHECK(std::abs(result.v[0] - complex<double>(0.0, 1.0)) < 5e-3);
    CHECK(result.converged);
  }
  SUBCASE("zero cascade is a no-op") {
    Eigen::VectorXcd g(2), v0(3);
    g << 1.0, complex<double>(0.0, 2.0);
    v0 << 1.0, complex<double>(0.0, 1.0), -1.0;
    const auto result = single_user::optimize_phases(
        g, Eigen::MatrixXcd::Zero(3, 2), v0, options);
    CHECK((result.v - v0).norm() == 0.0);
    CHECK(result.gains.back() == Approx(g.squaredNorm()).epsilon(1e-12));
  }
  SUBCASE("gain trajectory is non-decreasing on random instances") {
    auto stream = rng::substream(8, rng::StreamTag::kTrial);
    for (int trial = 0; trial < 40; ++trial) {
      const int q = 8, m = 4;
      Eigen::VectorXcd g(m), v0(q);
      Eigen::MatrixXcd cascade(q, m);
      for (int j = 0; j < m; ++j) g[j] = stream.cnormal();
      for (int r = 0; r < q; ++r) {
        v0[r] = std::polar(1.0, stream.uniform(0.0, 2 * M_PI));
        for (int c = 0; c < m; ++c) cascade(r, c) = stream.cnormal();
      }
      const auto result = single_user::optimize_phases(g, cascade, v0, options);
      for (size_t i = 1; i < result.gains.size(); ++i) {
        REQUIRE(result.gains[i] >= result.gains[i - 1] * (1.0 - 1e-12));
      }
      // Phase-magnitude invariance: scaling the linearization argument by a
      // positive constant leaves the step unchanged.
      const auto step = single_user::sca_phase_step(v0, g, cascade);
      const auto scaled = single_user::sca_phase_step(v0, (2.5 * g).eval(),
                                                      (2.5 * cascade).eval());
      CHECK((step - scaled).norm() < 1e-12);
    }
  }
  SUBCASE("beats random phase search almost always") {
    auto stream = rng::substream(9, rng::StreamTag::kTrial);
    int wins = 0;
    const int trials = 20;
    for (int trial = 0; trial < trials; ++trial) {
      const int q = 8, m = 4;
      Eigen::VectorXcd g(m);
      Eigen::MatrixXcd cascade(q, m);
      for (int j = 0; j < m; ++j) g[j] = stream.cnormal();
      for (int r = 0; r < q; ++r) {
        for (int c = 0; c < m; ++c) cascade(r, c) = stream.cnormal();
      }
      auto gain_of = [&](const Eigen::VectorXcd& v) {
        return (g + cascade.adjoint() * v).squaredNorm();
      };
      const auto sca = single_user::optimize_phases(
          g, cascade, Eigen::VectorXcd::Ones(q), options);
      const auto random = oracles::random_phase_search(gain_of, q, 10000, 555 + trial);
      if (sca.gains.back() >= random.gain) ++wins;
    }
    CHECK(wins >= trials - 1);
  }
}

TEST_CASE("closed-form optimal power") {
  SUBCASE("hand instance gbar=1, mu=1, P0=1+e") {
    single_user::PowerProblem p;
    p.gbar = 1.0;
    p.p_static = 1.0 + M_E;
    p.mu = 1.0;
    p.p_min = 0.0;
    p.p_max = 10.0;
    p.bandwidth_hz = 1.0;
    const double p_star = single_user::optimal_power(p);
    CHECK(p_star == Approx(3.79294).epsilon(1e-5));
    // Stationarity: gbar (mu p + P0) = mu (1 + gbar p) ln(1 + gbar p).
    const double residual = p.gbar * (p.mu * p_star + p.p_static) -
                            p.mu * (1.0 + p.gbar * p_star) * std::log1p(p.gbar * p_star);
    CHECK(std::abs(residual) < 1e-9);
  }
  SUBCASE("clamping to p_min") {
    single_user::PowerProblem p;
    p.gbar = 1.0;
    p.p_static = 1.0 + M_E;
    p.mu = 1.0;
    p.p_min = 9.0;
    p.p_max = 10.0;
    p.bandwidth_hz = 1.0;
    CHECK(single_user::optimal_power(p) == 9.0);
  }
  SUBCASE("infeasible when p_min > p_max") {
    single_user::PowerProblem p;
    p.gbar = 1.0;
    p.p_static = 2.0;
    p.mu = 1.0;
    p.p_min = 11.0;
    p.p_max = 10.0;
    CHECK_THROWS_AS(single_user::optimal_power(p), InfeasibleError);
  }
  SUBCASE("never loses to a fine grid") {
    auto stream = rng::substream(10, rng::StreamTag::kTrial);
    for (int trial = 0; trial < 100; ++trial) {
      single_user::PowerProblem p;
      p.gbar = std::pow(10.0, stream.uniform(-1.0, 4.0));
      p.p_static = stream.uniform(0.5, 10.0);
      p.mu = stream.uniform(1.0, 2.0);
      p.p_min = 0.0;
      p.p_max = stream.uniform(1.0, 50.0);
      p.bandwidth_hz = 1.0;
      auto ee = [&](double power) {
        return std::log2(1.0 + p.gbar * power) / (p.mu * power + p.p_static);
      };
      const double p_star = single_user::optimal_power(p);
      const auto grid = oracles::grid_power(ee, p.p_min, p.p_max, 100000);
      REQUIRE(ee(p_star) >= grid.value - 1e-9);
    }
  }
}

TEST_CASE("on-off quadratic expansion") {
  SUBCASE("one coherent scalar RIS") {
    ChannelSet ch;
    ch.g = {Eigen::VectorXcd::Constant(1, 1.0)};
    ch.bs_ris = {Eigen::MatrixXcd::Constant(1, 1, 1.0)};
    ch.h = {{Eigen::VectorXcd::Constant(1, 1.0)}};
    const auto quad =
        single_user::build_onoff_quadratic(ch, PhaseConfig::zeros({1}));
    CHECK(quad.d0 == Approx(1.0));
    CHECK(quad.d[0] == Approx(3.0));
    CHECK(quad.evaluate(OnOffVector::all_on(1)) == Approx(4.0));
  }
  SUBCASE("two identical RISs interact") {
    ChannelSet ch;
    ch.g = {Eigen::VectorXcd::Constant(1, 1.0)};
    ch.bs_ris = {Eigen::MatrixXcd::Constant(1, 1, 1.0),
                 Eigen::MatrixXcd::Constant(1, 1, 1.0)};
    ch.h = {{Eigen::VectorXcd::Constant(1, 1.0), Eigen::VectorXcd::Constant(1, 1.0)}};
    const auto quad =
        single_user::build_onoff_quadratic(ch, PhaseConfig::zeros({1, 1}));
    CHECK(quad.dcross(1, 0) == Approx(2.0));
    CHECK(quad.evaluate(OnOffVector::all_on(2)) == Approx(9.0));  // |1+1+1|^2
  }
  SUBCASE("expansion equals the direct gain over all binary vectors") {
    auto stream = rng::substream(11, rng::StreamTag::kTrial);
    numerics::SolverOptions options;
    for (int trial = 0; trial < 30; ++trial) {
      SystemParams params = SystemParams::defaults_with(1, 3, 3, 2);
      const ChannelSet ch = testing::synthetic_channels(params, stream);
      Eigen::VectorXd theta(params.total_elements());
      for (int q = 0; q < theta.size(); ++q) theta[q] = stream.uniform(0.0, 2 * M_PI);
      const PhaseConfig phases(theta, params.elements_per_ris);
      const auto quad = single_user::build_onoff_quadratic(ch, phases);
      for (std::uint32_t mask = 0; mask < 8; ++mask) {
        OnOffVector x;
        x.x = {static_cast<std::uint8_t>(mask & 1),
               static_cast<std::uint8_t>((mask >> 1) & 1),
               static_cast<std::uint8_t>((mask >> 2) & 1)};
        const double direct =
            effective_channel(ch, phases, x, 0).squaredNorm();
        REQUIRE(quad.evaluate(x) ==
                Approx(direct).epsilon(1e-9).scale(std::max(direct, 1e-12)));
      }
    }
  }
  SUBCASE("Hermitian-symmetric combinations have negligible imaginary residue") {
    auto stream = rng::substream(13, rng::StreamTag::kTrial);
    SystemParams params = SystemParams::defaults_with(1, 3, 2, 2);
    const ChannelSet ch = testing::synthetic_channels(params, stream);
    const PhaseConfig phases = PhaseConfig::zeros(params.elements_per_ris);
    // Recompute d_l from its complex pieces and check the imaginary parts.
    for (int l = 0; l < 2; ++l) {
      const Eigen::VectorXcd s = phases.ris_coefficients(l);
      const Eigen::VectorXcd a =
          ch.bs_ris[l].adjoint() * (s.conjugate().cwiseProduct(ch.h[0][l]));
      const complex<double> dl =
          a.dot(a) + ch.g[0].dot(a) + a.dot(ch.g[0]);
      CHECK(std::abs(dl.imag()) <= 1e-10 * std::max(1.0, std::abs(dl.real())));
    }
  }
}

TEST_CASE("dual inner loop (fixed lambda)") {
  numerics::SolverOptions options;

  SUBCASE("one RIS with dominant benefit stays on") {
    single_user::OnOffQuadratic quad;
    quad.d0 = 1.0;
    quad.d = Eigen::VectorXd::Constant(1, 50.0);
    quad.dcross = Eigen::MatrixXd::Zero(1, 1);
    SystemParams params = SystemParams::defaults_with(1, 1, 1, 1);
    params.bandwidth_hz = 1.0;
    params.noise_w = 1.0;
    params.min_rates_bps = {0.0};
    const auto result = single_user::dual_onoff_inner(quad, 1e-3, 1.0, params, options);
    CHECK(result.x.x[0] == 1);
    CHECK(result.y == Approx(51.0));
  }
  SUBCASE("one RIS with zero benefit turns off") {
    single_user::OnOffQuadratic quad;
    quad.d0 = 1.0;
    quad.d = Eigen::VectorXd::Zero(1);
    quad.dcross = Eigen::MatrixXd::Zero(1, 1);
    SystemParams params = SystemParams::defaults_with(1, 1, 1, 1);
    params.bandwidth_hz = 1.0;
    params.noise_w = 1.0;
    params.min_rates_bps = {0.0};
    const auto result = single_user::dual_onoff_inner(quad, 0.5, 1.0, params, options);
    CHECK(result.x.x[0] == 0);
  }
  SUBCASE("lambda-objective matches the exhaustive maximum (L=2)") {
    auto stream = rng::substream(14, rng::StreamTag::kTrial);
    for (int trial = 0; trial < 30; ++trial) {
      const auto inst = testing::aligned_onoff_instance(2, stream, options);
      const double lambda = stream.uniform(0.0, 0.5) * inst.params.bandwidth_hz;
      const auto inner = single_user::dual_onoff_inner(inst.quad, lambda, inst.p1,
                                                       inst.params, options);
      double best = -1e300;
      for (std::uint32_t mask = 0; mask < 4; ++mask) {
        OnOffVector x;
        x.x = {static_cast<std::uint8_t>(mask & 1),
               static_cast<std::uint8_t>((mask >> 1) & 1)};
        const auto ee = testing::onoff_ee(inst, x);
        if (!ee) continue;
        const double gain = inst.quad.evaluate(x);
        const double rate = std::log2(1.0 + inst.p1 * gain / inst.params.noise_w);
        double power = inst.params.amplifier_inefficiency * inst.p1 +
                       inst.params.p_user_w[0] + inst.params.p_bs_w;
        for (int l = 0; l < 2; ++l) {
          if (x.x[l]) {
            power += inst.params.elements_per_ris[l] * inst.params.p_ris_element_w;
          }
        }
        best = std::max(best, rate - lambda * power);
      }
      REQUIRE(inner.lagrangian_objective ==
              Approx(best).epsilon(1e-6).scale(std::max(std::abs(best), 1e-9)));
      // Multipliers and the recovered auxiliaries satisfy their box rules.
      CHECK(inner.dual.alpha >= 0.0);
      for (int p = 0; p < inner.dual.kappa1.size(); ++p) {
        CHECK(inner.dual.kappa1[p] >= 0.0);
        CHECK(inner.dual.kappa2[p] >= 0.0);
        CHECK(inner.dual.kappa3[p] >= 0.0);
      }
      const double z = inner.z[0];
      CHECK(z >= inner.x.x[0] + inner.x.x[1] - 1.0);
      CHECK(z <= inner.x.x[0]);
      CHECK(z <= inner.x.x[1]);
    }
  }
}

TEST_CASE("Dinkelbach on-off selection") {
  numerics::SolverOptions options;

  SUBCASE("zero RIS channels turn everything off") {
    ChannelSet ch;
    ch.g = {Eigen::VectorXcd::Constant(2, 1.0)};
    ch.bs_ris = {Eigen::MatrixXcd::Zero(2, 2), Eigen::MatrixXcd::Zero(2, 2)};
    ch.h = {{Eigen::VectorXcd::Zero(2), Eigen::VectorXcd::Zero(2)}};
    SystemParams params = SystemParams::defaults_with(1, 2, 2, 2);
    params.bandwidth_hz = 1.0;
    params.noise_w = 1.0;
    params.min_rates_bps = {0.0};
    const auto quad = single_user::build_onoff_quadratic(
        ch, PhaseConfig::zeros(params.elements_per_ris));
    const auto result = single_user::dinkelbach_onoff(quad, 1.0, params, options);
    CHECK(result.x.active_count() == 0);
  }
  SUBCASE("matches the exhaustive oracle on random L=4 instances") {
    auto stream = rng::substream(15, rng::StreamTag::kTrial);
    for (int trial = 0; trial < 40; ++trial) {
      const auto inst = testing::aligned_onoff_instance(4, stream, options);
      const auto result =
          single_user::dinkelbach_onoff(inst.quad, inst.p1, inst.params, options);
      auto evaluate = [&](const OnOffVector& x) { return testing::onoff_ee(inst, x); };
      const auto oracle = oracles::exhaustive_onoff(evaluate, 4);
      const double got = evaluate(result.x).value_or(0.0);
      REQUIRE(got == Approx(oracle.value).epsilon(1e-6));
      // Dinkelbach termination: H(lambda) in [0, epsilon).
      CHECK(result.h_final >= -1e-12);
      CHECK(result.h_final < result.h_epsilon);
    }
  }
}

TEST_CASE("single-user outer alternation") {
  numerics::SolverOptions options;

  SUBCASE("scalar instance against a 3-D brute-force grid") {
    // L=1, N=1, M=1: enumerate theta x power x on-off directly.
    auto stream = rng::substream(16, rng::StreamTag::kTrial);
    for (int trial = 0; trial < 10; ++trial) {
      SystemParams params = testing::unit_scale_params(1, 1, 1, 1, stream);
      ChannelSet ch;
      ch.g = {Eigen::VectorXcd::Constant(1, stream.cnormal())};
      ch.bs_ris = {Eigen::MatrixXcd::Constant(1, 1, stream.cnormal())};
      ch.h = {{Eigen::VectorXcd::Constant(1, stream.cnormal())}};

      single_user::SingleUserResult result;
      bool feasible = true;
      try {
        result = single_user::optimize_single_user(ch, params, options);
      } catch (const InfeasibleError&) {
        feasible = false;
      }

      double best = 0.0;
      const int theta_grid = 256;
      const int power_grid = 4096;
      for (int onoff = 0; onoff <= 1; ++onoff) {
        for (int t = 0; t < (onoff ? theta_grid : 1); ++t) {
          const double theta = 2.0 * M_PI * t / theta_grid;
          const complex<double> eff =
              ch.g[0][0] + (onoff ? std::polar(1.0, -theta) * ch.bs_ris[0](0, 0) *
                                        std::conj(ch.h[0][0][0])
                          : 0.0);
          const double gbar = std::norm(eff) / params.noise_w;
          const double p0 = params.p_user_w[0] + params.p_bs_w +
                            onoff * params.p_ris_element_w;
          for (int pi = 1; pi <= power_grid; ++pi) {
            const double p = params.p_max_w * pi / power_grid;
            const double rate = std::log2(1.0 + gbar * p);
            if (rate < params.min_rates_bps[0] * (1.0 - 1e-6)) continue;
            best = std::max(best,
                            rate / (params.amplifier_inefficiency * p + p0));
          }
        }
      }
      if (feasible) {
        REQUIRE(result.point.energy_efficiency >= best * (1.0 - 0.01));
      } else {
        REQUIRE(best == 0.0);  // the grid found nothing feasible either
      }
    }
  }

  SUBCASE("zero-channel RIS ends up off") {
    auto stream = rng::substream(17, rng::StreamTag::kTrial);
    SystemParams params = testing::unit_scale_params(1, 2, 2, 2, stream);
    params.min_rates_bps = {0.1};
    ChannelSet ch = testing::synthetic_channels(params, stream);
    ch.bs_ris[1].setZero();
    ch.h[0][1].setZero();
    const auto result = single_user::optimize_single_user(ch, params, options);
    CHECK(result.point.onoff.x[1] == 0);
  }

  SUBCASE("EE trajectory is non-decreasing across outer iterations") {
    auto stream = rng::substream(18, rng::StreamTag::kTrial);
    for (int trial = 0; trial < 30; ++trial) {
      SystemParams params = testing::unit_scale_params(1, 4, 3, 2, stream);
      const ChannelSet ch = testing::synthetic_channels(params, stream);
      const auto result = single_user::optimize_single_user(ch, params, options);
      for (size_t i = 1; i < result.ee_trajectory.size(); ++i) {
        REQUIRE(result.ee_trajectory[i] >= result.ee_trajectory[i - 1] - 1e-9);
      }
      CHECK(check_feasibility(params, result.point).empty());
    }
  }

  SUBCASE("impossible demand raises InfeasibleError") {
    auto stream = rng::substream(19, rng::StreamTag::kTrial);
    SystemParams params = testing::unit_scale_params(1, 2, 2, 2, stream);
    params.min_rates_bps = {1e9};  // unreachable at unit scale
    const ChannelSet ch = testing::synthetic_channels(params, stream);
    CHECK_THROWS_AS(single_user::optimize_single_user(ch, params, options),
                    InfeasibleError);
  }
}
