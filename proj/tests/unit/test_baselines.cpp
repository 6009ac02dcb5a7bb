#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "risee/baselines.hpp"
#include "risee/errors.hpp"
#include "test_instances.hpp"

using namespace risee;
using doctest::Approx;

TEST_CASE("CRIS is the DRIS pipeline on the rebuilt instance") {
  numerics::SolverOptions options;
  SystemParams params = SystemParams::defaults();  // L=8, N=4

  SUBCASE("parameter rebuild concentrates the elements") {
    const SystemParams cp = baselines::cris_params(params);
    CHECK(cp.num_ris == 1);
    REQUIRE(cp.elements_per_ris.size() == 1);
    CHECK(cp.elements_per_ris[0] == 32);
    CHECK(cp.total_elements() == params.total_elements());
  }

  SUBCASE("an L=1 instance is bit-identical through both entry points") {
    SystemParams single = SystemParams::defaults_with(1, 4, 1, 8);
    const Topology topo = generate_topology(single, 300.0, 100.0, 21);
    const ChannelSet ch = generate_channels(topo, single, 21);
    const auto via_cris = baselines::solve_cris(ch, single, options);
    const auto via_dris = baselines::solve_dris(ch, single, options);
    CHECK(via_cris.point.energy_efficiency == via_dris.point.energy_efficiency);
    CHECK(via_cris.point.sum_rate_bps == via_dris.point.sum_rate_bps);
    CHECK(via_cris.point.onoff.x == via_dris.point.onoff.x);
  }
}

TEST_CASE("AFR effective SNR model") {
  SUBCASE("balanced hops sit near min(g1, g2) within the +1 correction") {
    const double g1 = 100.0, g2 = 100.0;
    const double eff = g1 * g2 / (g1 + g2 + 1.0);
    CHECK(eff == Approx(10000.0 / 201.0).epsilon(1e-12));
    CHECK(eff < std::min(g1, g2));
    CHECK(eff > std::min(g1, g2) / 2.0 - 1.0);
  }
  SUBCASE("second hop saturation recovers the first hop") {
    const double g1 = 25.0;
    for (double g2 : {1e6, 1e9, 1e12}) {
      const double eff = g1 * g2 / (g1 + g2 + 1.0);
      CHECK(eff == Approx(g1).epsilon(1e-4));
    }
  }
}

TEST_CASE("AFR power bookkeeping") {
  // One active relay: P = mu (p + P_T) + P_B + P_1 + N P_A.
  SystemParams params = SystemParams::defaults_with(1, 4, 2, 4);
  params.min_rates_bps = {0.0};
  const Topology topo = generate_topology(params, 300.0, 100.0, 31);
  baselines::BaselineConfig config;
  const auto result = baselines::solve_afr(topo, params, config, 31);

  CHECK(result.point.onoff.active_count() == 1);
  const double p_bs =
      (result.point.total_power_w -
       (params.p_bs_w + params.p_user_w[0] + 4 * params.relay_antenna_circuit_w)) /
          params.amplifier_inefficiency -
      params.relay_power_w;
  CHECK(p_bs >= 0.0);
  CHECK(p_bs <= params.p_max_w * (1.0 + 1e-9));
  const double rebuilt = params.amplifier_inefficiency * (p_bs + params.relay_power_w) +
                         params.p_bs_w + params.p_user_w[0] +
                         4 * params.relay_antenna_circuit_w;
  CHECK(result.point.total_power_w == Approx(rebuilt).epsilon(1e-12));

  SUBCASE("charging idle relays adds their antenna circuits") {
    baselines::BaselineConfig all_charged = config;
    all_charged.afr_charge_idle_relays = true;
    const auto charged = baselines::solve_afr(topo, params, all_charged, 31);
    CHECK(charged.point.total_power_w > result.point.total_power_w);
  }
}

TEST_CASE("AFR rate is monotone in the relay power") {
  SystemParams params = SystemParams::defaults_with(1, 4, 2, 4);
  params.min_rates_bps = {0.0};
  // A budget far below the EE knee pins the BS power at P_max, so the
  // returned rate isolates the relay-power effect.
  params.p_max_w = 1e-3;
  const Topology topo = generate_topology(params, 300.0, 100.0, 32);
  baselines::BaselineConfig config;
  double prev_rate = -1.0;
  for (double pt_dbm : {20.0, 25.0, 30.0, 35.0}) {
    SystemParams p = params;
    p.relay_power_w = numerics::dbm_to_watts(pt_dbm);
    const auto result = baselines::solve_afr(topo, p, config, 32);
    CHECK(result.point.sum_rate_bps >= prev_rate * (1.0 - 1e-9));
    prev_rate = result.point.sum_rate_bps;
  }
}

TEST_CASE("AFR infeasible demand") {
  SystemParams params = SystemParams::defaults_with(1, 4, 2, 4);
  params.min_rates_bps = {1e9};  // 1 Gbit/s over 1 MHz never fits
  const Topology topo = generate_topology(params, 300.0, 100.0, 33);
  baselines::BaselineConfig config;
  CHECK_THROWS_AS(baselines::solve_afr(topo, params, config, 33), InfeasibleError);
}

TEST_CASE("exhaustive DRIS multi-start") {
  numerics::SolverOptions options;
  SystemParams params = SystemParams::defaults_with(1, 4, 4, 2);
  const Topology topo = generate_topology(params, 300.0, 100.0, 41);
  const ChannelSet ch = generate_channels(topo, params, 41);

  SUBCASE("one start is exactly the default pipeline") {
    const auto exh = baselines::solve_exhaustive_dris(ch, params, options, 1, 41);
    const auto dris = baselines::solve_dris(ch, params, options);
    CHECK(exh.point.energy_efficiency == dris.point.energy_efficiency);
    CHECK(exh.point.onoff.x == dris.point.onoff.x);
  }

  SUBCASE("more starts never lose (nested prefixes)") {
    const auto dris = baselines::solve_dris(ch, params, options);
    double prev = -1.0;
    for (int starts : {1, 4, 16}) {
      const auto exh = baselines::solve_exhaustive_dris(ch, params, options, starts, 41);
      CHECK(exh.point.energy_efficiency >= dris.point.energy_efficiency);
      CHECK(exh.point.energy_efficiency >= prev);
      prev = exh.point.energy_efficiency;
    }
  }
}
