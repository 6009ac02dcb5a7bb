#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "risee/errors.hpp"
#include "risee/model.hpp"
#include "risee/numerics.hpp"

namespace risee::multi_user {

/// Iterate of the penalized phase subproblem. s is relaxed to |s_q| <= 1
/// during iterations; beta is kept in raw Watts.
struct PhaseSubproblemState {
  Eigen::VectorXcd s;     // reflection coefficients, length Q
  Eigen::VectorXd eta;    // SINR slack, length K
  Eigen::VectorXd beta;   // interference-plus-noise slack (W), length K
};

/// Solves the convexified phase program at the linearization point `state`:
/// maximize sum_k log2(1+eta_k) + 2C sum_q Re(conj(s_q^prev)(s_q - s_q^prev))
/// s.t. the linearized signal constraint, the convex interference constraint,
/// |s_q| <= 1 and the eta floors. Returns the next state; throws
/// InfeasibleError when no strictly feasible start can be built.
PhaseSubproblemState solve_phase_subproblem(const PhaseSubproblemState& state,
                                            const ChannelSet& channels,
                                            const Beamformers& beams,
                                            const OnOffVector& onoff,
                                            const SystemParams& params,
                                            const numerics::SolverOptions& options,
                                            double penalty_c);

struct PhaseMuResult {
  PhaseConfig phases;       // best feasible iterate, projected to unit modulus
  double sum_rate_bps = 0.0;
  std::vector<double> objective_trajectory;  // penalized objective per SCA round
  double min_modulus = 1.0;  // min |s_q| before projection
  int iterations = 0;
  bool improved = false;     // false => input returned unchanged
};

/// SCA loop over solve_phase_subproblem with penalty escalation (C x10 up to
/// 1e6 while min |s_q| < 0.99). Keeps the best unit-modulus-projected iterate
/// that still meets the rate floors; falls back to the input phases if no
/// projected iterate is feasible.
PhaseMuResult optimize_phases_mu(const ChannelSet& channels,
                                 const Beamformers& beams,
                                 const OnOffVector& onoff,
                                 const SystemParams& params,
                                 const PhaseConfig& s0,
                                 const numerics::SolverOptions& options);

/// Iterate of the beamforming subproblem; gamma_slack is the
/// interference-plus-noise slack (W), distinct from the SINR.
struct BeamSubproblemState {
  std::vector<Eigen::VectorXcd> w;  // K beamformers, rotated so g~^H w_k >= 0
  Eigen::VectorXd zeta;             // SINR slack
  Eigen::VectorXd gamma_slack;      // denominator slack (W)
  double lambda = 0.0;              // Dinkelbach parameter (bit/Joule)
};

/// One Dinkelbach-wrapped convex solve of the beam program at the fixed
/// linearization point `state`; lambda is iterated until H(lambda) < eps.
BeamSubproblemState solve_beam_subproblem(const BeamSubproblemState& state,
                                          const ChannelSet& channels,
                                          const PhaseConfig& phases,
                                          const OnOffVector& onoff,
                                          const SystemParams& params,
                                          const numerics::SolverOptions& options);

/// The inner convex solve for one fixed Dinkelbach parameter.
BeamSubproblemState solve_beam_subproblem_fixed_lambda(
    const BeamSubproblemState& state, double lambda, const ChannelSet& channels,
    const PhaseConfig& phases, const OnOffVector& onoff,
    const SystemParams& params, const numerics::SolverOptions& options);

/// Greedy deactivation (all-on start): repeatedly turns off the single RIS
/// whose removal most improves EE (infeasible candidates score 0), stopping
/// when no deactivation strictly helps. Throws InfeasibleError when the
/// all-on start misses a rate demand with the given phases/beams.
OnOffVector greedy_onoff(const ChannelSet& channels, const PhaseConfig& phases,
                         const Beamformers& beams, const SystemParams& params);

struct MultiUserInit {
  std::optional<PhaseConfig> phases;
  std::optional<OnOffVector> onoff;
  std::optional<Beamformers> beams;
};

struct MultiUserResult {
  OperatingPoint point;
  std::vector<double> ee_trajectory;
  int outer_iterations = 0;
  bool converged = false;
};

/// Outer alternation: phases -> beams (SCA + Dinkelbach) -> greedy on-off,
/// each block keeping the incumbent when it cannot improve, until the EE
/// stabilizes. Throws InfeasibleError when no configuration meets the rate
/// demands.
MultiUserResult optimize_multi_user(const ChannelSet& channels,
                                    const SystemParams& params,
                                    const numerics::SolverOptions& options,
                                    const MultiUserInit& init = {});

/// Feasible starting beamformers for the given phases/on-off (MRT, then
/// zero-forcing repair); throws InfeasibleError if neither meets the floors.
Beamformers initial_beamformers(const ChannelSet& channels,
                                const PhaseConfig& phases,
                                const OnOffVector& onoff,
                                const SystemParams& params);

}  // namespace risee::multi_user
