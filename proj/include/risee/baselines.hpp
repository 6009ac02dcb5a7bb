#pragma once

#include <cstdint>
#include <string>

#include "risee/errors.hpp"
#include "risee/model.hpp"
#include "risee/numerics.hpp"

namespace risee::baselines {

enum class Scheme { DRIS, CRIS, AFR, EXH_DRIS };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);  // throws std::invalid_argument

struct BaselineConfig {
  Scheme scheme = Scheme::DRIS;
  Vec2 cris_position{100.0, 0.0};
  int exh_starts = 1000;
  double afr_prelog = 1.0;  // rate pre-log factor, 0.5 or 1.0
  bool afr_charge_idle_relays = false;  // alternative circuit-power accounting
};

struct SolveSummary {
  OperatingPoint point;
  int outer_iterations = 0;
  bool converged = true;
};

/// Rebuild params for the central-RIS scheme: L=1, N_1 = sum_l N_l.
SystemParams cris_params(const SystemParams& params);

/// Replace the RIS list with the single central surface.
Topology cris_topology(const Topology& topology, const Vec2& position);

/// The DRIS pipeline run on the equivalent single-RIS instance; channels must
/// already be drawn for the CRIS topology/params.
SolveSummary solve_cris(const ChannelSet& channels, const SystemParams& params,
                        const numerics::SolverOptions& options);

/// Two-hop amplify-and-forward baseline: per user the relay maximizing
/// gamma1*gamma2/(gamma1+gamma2+1) is selected, the BS power is tuned by a
/// 1-D EE search, and the power model charges mu(p + P_T per active relay)
/// + P_B + sum_k P_k + N P_A per active relay.
SolveSummary solve_afr(const Topology& topology, const SystemParams& params,
                       const BaselineConfig& config, std::uint64_t seed);

/// DRIS from `starts` initializations: start 0 is the default (all-on,
/// theta=0), the rest draw random unit-modulus phases and random on-off
/// vectors from per-start substreams. Returns the feasible best.
SolveSummary solve_exhaustive_dris(const ChannelSet& channels,
                                   const SystemParams& params,
                                   const numerics::SolverOptions& options,
                                   int starts, std::uint64_t seed);

/// Dispatcher used by the CLI: K=1 runs the single-user pipeline, K>1 the
/// multi-user one.
SolveSummary solve_dris(const ChannelSet& channels, const SystemParams& params,
                        const numerics::SolverOptions& options);

}  // namespace risee::baselines
