#include "risee/baselines.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "risee/errors.hpp"
#include "risee/multi_user.hpp"
#include "risee/rng.hpp"
#include "risee/single_user.hpp"

namespace risee::baselines {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::DRIS: return "DRIS";
    case Scheme::CRIS: return "CRIS";
    case Scheme::AFR: return "AFR";
    case Scheme::EXH_DRIS: return "EXH_DRIS";
  }
  return "?";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "DRIS") return Scheme::DRIS;
  if (name == "CRIS") return Scheme::CRIS;
  if (name == "AFR") return Scheme::AFR;
  if (name == "EXH_DRIS" || name == "EXH-DRIS") return Scheme::EXH_DRIS;
  throw std::invalid_argument("unknown scheme: " + name);
}

SystemParams cris_params(const SystemParams& params) {
  SystemParams out = params;
  out.num_ris = 1;
  out.elements_per_ris = {params.total_elements()};
  return out;
}

Topology cris_topology(const Topology& topology, const Vec2& position) {
  Topology out = topology;
  out.ris = {position};
  return out;
}

SolveSummary solve_dris(const ChannelSet& channels, const SystemParams& params,
                        const numerics::SolverOptions& options) {
  SolveSummary summary;
  if (params.num_users == 1) {
    auto result = single_user::optimize_single_user(channels, params, options);
    summary.point = std::move(result.point);
    summary.outer_iterations = result.outer_iterations;
    summary.converged = result.converged;
  } else {
    auto result = multi_user::optimize_multi_user(channels, params, options);
    summary.point = std::move(result.point);
    summary.outer_iterations = result.outer_iterations;
    summary.converged = result.converged;
  }
  return summary;
}

SolveSummary solve_cris(const ChannelSet& channels, const SystemParams& params,
                        const numerics::SolverOptions& options) {
  if (params.num_ris != 1) {
    throw std::invalid_argument("solve_cris: params must describe a single RIS");
  }
  return solve_dris(channels, params, options);
}

namespace {

struct RelayLink {
  double bs_gain = 0.0;    // sigma_max(G_l)^2 / sigma^2, per Watt of BS power
  double relay_snr = 0.0;  // P_T |h_kl|^2 / sigma^2
};

double af_effective_snr(double gamma1, double gamma2) {
  return gamma1 * gamma2 / (gamma1 + gamma2 + 1.0);
}

}  // namespace

SolveSummary solve_afr(const Topology& topology, const SystemParams& params,
                       const BaselineConfig& config, std::uint64_t seed) {
  params.validate();
  const int users = params.num_users;
  const int relays = params.num_ris;  // relays share the DRIS deployment
  const double sigma2 = params.noise_w;

  // Same fading draws as the RIS solve: G_l is the BS->relay channel, h_kl
  // the relay->user channel.
  const ChannelSet channels = generate_channels(topology, params, seed);

  // Per user, the relay maximizing the end-to-end SNR at reference power.
  std::vector<int> chosen(users, -1);
  std::vector<RelayLink> links(users);
  const double p_ref = params.p_max_w / users;
  for (int k = 0; k < users; ++k) {
    double best = -1.0;
    for (int l = 0; l < relays; ++l) {
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(channels.bs_ris[l]);
      const double smax = svd.singularValues()[0];
      RelayLink link;
      link.bs_gain = smax * smax / sigma2;
      link.relay_snr = params.relay_power_w * channels.h[k][l].squaredNorm() / sigma2;
      const double snr = af_effective_snr(link.bs_gain * p_ref, link.relay_snr);
      if (snr > best) {
        best = snr;
        chosen[k] = l;
        links[k] = link;
      }
    }
  }

  std::vector<std::uint8_t> relay_active(relays, 0);
  for (int k = 0; k < users; ++k) relay_active[chosen[k]] = 1;
  int active_count = 0;
  for (auto v : relay_active) active_count += v;

  const double prelog = config.afr_prelog;
  auto rate_of = [&](int k, double p_total) {
    const double gamma1 = links[k].bs_gain * (p_total / users);
    const double snr = af_effective_snr(gamma1, links[k].relay_snr);
    return prelog * params.bandwidth_hz * std::log2(1.0 + snr);
  };
  double antenna_circuit = 0.0;
  for (int l = 0; l < relays; ++l) {
    if (config.afr_charge_idle_relays || relay_active[l]) {
      antenna_circuit += params.elements_per_ris[l] * params.relay_antenna_circuit_w;
    }
  }
  auto power_of = [&](double p_total) {
    double p = params.amplifier_inefficiency *
               (p_total + params.relay_power_w * active_count);
    p += params.p_bs_w;
    for (double pk : params.p_user_w) p += pk;
    p += antenna_circuit;
    return p;
  };
  auto ee_of = [&](double p_total) {
    double rate = 0.0;
    for (int k = 0; k < users; ++k) rate += rate_of(k, p_total);
    return rate / power_of(p_total);
  };

  // Minimum BS power meeting every demand: gamma_eff >= f requires
  // p/K >= f (gamma2 + 1) / (a (gamma2 - f)) and gamma2 > f.
  double p_min = 0.0;
  for (int k = 0; k < users; ++k) {
    const double demand = params.min_rates_bps[k];
    if (demand <= 0.0) continue;
    const double f = std::exp2(demand / (prelog * params.bandwidth_hz)) - 1.0;
    const double gamma2 = links[k].relay_snr;
    if (!(gamma2 > f) || !(links[k].bs_gain > 0.0)) {
      throw InfeasibleError("solve_afr: relay hop cannot carry the demand");
    }
    const double pk = f * (gamma2 + 1.0) / (links[k].bs_gain * (gamma2 - f));
    p_min = std::max(p_min, pk * users);
  }
  if (p_min > params.p_max_w) {
    throw InfeasibleError("solve_afr: demand misses even at full BS power");
  }

  // EE is unimodal in the BS power (concave rate over affine power):
  // golden-section search seeded by a coarse grid.
  double lo = std::max(p_min, params.p_max_w * 1e-9);
  double hi = params.p_max_w;
  {
    constexpr int kCoarse = 64;
    double best_p = lo;
    double best = ee_of(lo);
    for (int i = 1; i <= kCoarse; ++i) {
      const double p = lo + (hi - lo) * i / kCoarse;
      const double value = ee_of(p);
      if (value > best) {
        best = value;
        best_p = p;
      }
    }
    const double width = (hi - lo) / kCoarse;
    lo = std::max(lo, best_p - width);
    hi = std::min(hi, best_p + width);
  }
  constexpr double kGolden = 0.6180339887498949;
  double a = lo, b = hi;
  double c1 = b - kGolden * (b - a);
  double c2 = a + kGolden * (b - a);
  double f1 = ee_of(c1), f2 = ee_of(c2);
  for (int it = 0; it < 120 && (b - a) > 1e-12 * std::max(1.0, b); ++it) {
    if (f1 >= f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - kGolden * (b - a);
      f1 = ee_of(c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + kGolden * (b - a);
      f2 = ee_of(c2);
    }
  }
  double p_star = 0.5 * (a + b);
  for (double cand : {p_min, params.p_max_w}) {
    if (cand >= p_min && cand <= params.p_max_w && ee_of(cand) > ee_of(p_star)) {
      p_star = cand;
    }
  }

  SolveSummary summary;
  OperatingPoint point;
  point.phases = PhaseConfig::zeros(params.elements_per_ris);
  point.onoff.x = relay_active;
  point.beams.w.resize(users);
  point.sinr.resize(users);
  point.rates_bps.resize(users);
  point.sum_rate_bps = 0.0;
  for (int k = 0; k < users; ++k) {
    // Bookkeeping beam: MRT toward the chosen relay's best direction.
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(channels.bs_ris[chosen[k]],
                                           Eigen::ComputeThinV);
    point.beams.w[k] = std::sqrt(p_star / users) * svd.matrixV().col(0);
    const double gamma1 = links[k].bs_gain * (p_star / users);
    point.sinr[k] = af_effective_snr(gamma1, links[k].relay_snr);
    point.rates_bps[k] = prelog * params.bandwidth_hz * std::log2(1.0 + point.sinr[k]);
    point.sum_rate_bps += point.rates_bps[k];
  }
  point.total_power_w = power_of(p_star);
  point.energy_efficiency = point.sum_rate_bps / point.total_power_w;
  summary.point = std::move(point);
  summary.outer_iterations = 1;
  return summary;
}

SolveSummary solve_exhaustive_dris(const ChannelSet& channels,
                                   const SystemParams& params,
                                   const numerics::SolverOptions& options,
                                   int starts, std::uint64_t seed) {
  if (starts < 1) throw std::invalid_argument("solve_exhaustive_dris: starts >= 1");
  const int q_total = params.total_elements();
  const int ris_count = params.num_ris;

  SolveSummary best;
  bool have_best = false;
  int total_outer = 0;

  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXcd v0 = Eigen::VectorXcd::Ones(q_total);
    OnOffVector x0 = OnOffVector::all_on(ris_count);
    if (s > 0) {
      auto stream = rng::substream(seed, rng::StreamTag::kExhaustiveStart,
                                   {static_cast<std::uint64_t>(s)});
      for (int q = 0; q < q_total; ++q) {
        v0[q] = std::polar(1.0, stream.uniform(0.0, 2.0 * M_PI));
      }
      for (int l = 0; l < ris_count; ++l) {
        x0.x[l] = stream.uniform() < 0.5 ? 0 : 1;
      }
    }
    try {
      SolveSummary cand;
      if (params.num_users == 1) {
        auto result =
            single_user::optimize_single_user(channels, params, options, &v0, &x0);
        cand.point = std::move(result.point);
        cand.outer_iterations = result.outer_iterations;
        cand.converged = result.converged;
      } else {
        multi_user::MultiUserInit init;
        init.phases = PhaseConfig::from_coefficients(v0.conjugate(),
                                                     params.elements_per_ris);
        init.onoff = x0;
        auto result = multi_user::optimize_multi_user(channels, params, options, init);
        cand.point = std::move(result.point);
        cand.outer_iterations = result.outer_iterations;
        cand.converged = result.converged;
      }
      total_outer += cand.outer_iterations;
      if (!have_best ||
          cand.point.energy_efficiency > best.point.energy_efficiency) {
        best = std::move(cand);
        have_best = true;
      }
    } catch (const InfeasibleError&) {
      continue;  // this start found no feasible point
    }
  }
  if (!have_best) {
    throw InfeasibleError("solve_exhaustive_dris: every start was infeasible");
  }
  best.outer_iterations = total_outer;
  return best;
}

}  // namespace risee::baselines
