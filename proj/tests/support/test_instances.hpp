#pragma once

// Shared generators for synthetic unit-scale test instances. Unit scale keeps
// every scheme tradeoff active (RIS gains comparable to the direct link, a
// power model where switching an RIS off matters), which is where the on-off
// and phase machinery is genuinely stressed.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "risee/model.hpp"
#include "risee/numerics.hpp"
#include "risee/rng.hpp"
#include "risee/single_user.hpp"

namespace risee::testing {

/// Synthetic CN(0,1)-scale channels; ris_scale shrinks cascade entries so the
/// aligned cascade is comparable to (not dominant over) the direct link.
inline ChannelSet synthetic_channels(const SystemParams& params, rng::Stream& stream,
                                     double ris_scale = 0.4) {
  const int users = params.num_users;
  const int antennas = params.num_antennas;
  const int ris_count = params.num_ris;

  ChannelSet ch;
  ch.g.resize(users);
  for (int k = 0; k < users; ++k) {
    ch.g[k].resize(antennas);
    for (int m = 0; m < antennas; ++m) ch.g[k][m] = stream.cnormal();
  }
  ch.bs_ris.resize(ris_count);
  for (int l = 0; l < ris_count; ++l) {
    const int n = params.elements_per_ris[l];
    const double scale = ris_scale / std::sqrt(static_cast<double>(params.total_elements()));
    ch.bs_ris[l].resize(n, antennas);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < antennas; ++c) ch.bs_ris[l](r, c) = scale * stream.cnormal();
    }
  }
  ch.h.assign(users, std::vector<Eigen::VectorXcd>(ris_count));
  for (int k = 0; k < users; ++k) {
    for (int l = 0; l < ris_count; ++l) {
      const int n = params.elements_per_ris[l];
      ch.h[k][l].resize(n);
      for (int r = 0; r < n; ++r) ch.h[k][l][r] = stream.cnormal();
    }
  }
  return ch;
}

/// Unit-scale params (B = 1 Hz, sigma^2 = 1 W) with an active on-off tradeoff.
inline SystemParams unit_scale_params(int users, int antennas, int ris_count,
                                      int elements_each, rng::Stream& stream) {
  SystemParams params =
      SystemParams::defaults_with(users, antennas, ris_count, elements_each);
  params.bandwidth_hz = 1.0;
  params.noise_w = 1.0;
  params.p_max_w = 10.0;
  params.p_bs_w = stream.uniform(1.0, 4.0);
  params.p_user_w.assign(users, stream.uniform(0.05, 0.3));
  params.p_ris_element_w = stream.uniform(0.02, 0.3);
  params.min_rates_bps.assign(users, stream.uniform(0.0, 0.5));
  return params;
}

struct OnOffInstance {
  SystemParams params;
  ChannelSet channels;
  PhaseConfig phases;
  single_user::OnOffQuadratic quad;
  double p1 = 0.0;
};

/// K=1 instance with phases aligned by the SCA stage at all-on, the way the
/// outer pipeline produces them.
inline OnOffInstance aligned_onoff_instance(int ris_count, rng::Stream& stream,
                                            const numerics::SolverOptions& options,
                                            int antennas = 4, int elements = 2) {
  OnOffInstance inst;
  inst.params = unit_scale_params(1, antennas, ris_count, elements, stream);
  inst.channels = synthetic_channels(inst.params, stream);
  const OnOffVector all_on = OnOffVector::all_on(ris_count);
  const auto cascade = build_cascade_matrix(inst.channels, all_on, 0);
  const auto aligned = single_user::optimize_phases(
      inst.channels.g[0], cascade,
      Eigen::VectorXcd::Ones(inst.params.total_elements()), options);
  inst.phases = PhaseConfig::from_conj_stack(aligned.v, inst.params.elements_per_ris);
  inst.quad = single_user::build_onoff_quadratic(inst.channels, inst.phases);
  inst.p1 = stream.uniform(0.2, inst.params.p_max_w);
  return inst;
}

/// EE of a binary on-off vector at fixed phases/power (K=1), or nullopt when
/// the rate floor is missed.
inline std::optional<double> onoff_ee(const OnOffInstance& inst, const OnOffVector& x) {
  const auto& p = inst.params;
  const double floor_gain =
      (std::exp2(p.min_rates_bps[0] / p.bandwidth_hz) - 1.0) * p.noise_w / inst.p1;
  const double gain = inst.quad.evaluate(x);
  if (gain < floor_gain * (1.0 - 1e-9)) return std::nullopt;
  const double rate = p.bandwidth_hz * std::log2(1.0 + inst.p1 * gain / p.noise_w);
  double power = p.amplifier_inefficiency * inst.p1 + p.p_user_w[0] + p.p_bs_w;
  for (int l = 0; l < p.num_ris; ++l) {
    if (x.x[l]) power += p.elements_per_ris[l] * p.p_ris_element_w;
  }
  return rate / power;
}

}  // namespace risee::testing
