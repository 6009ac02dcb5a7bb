#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "risee/errors.hpp"
#include "risee/model.hpp"
#include "risee/numerics.hpp"

namespace risee::single_user {

/// Constants of the K=1 power problem after phases and on-off are fixed.
struct PowerProblem {
  double gbar = 0.0;         // |effective channel|^2 / sigma^2  (1/W)
  double p_static = 0.0;     // P_0 = P_1 + P_B + sum_l x_l N_l P_R
  double mu = 1.0;
  double p_min = 0.0;        // (2^(R_1/B) - 1) / gbar
  double p_max = 0.0;
  double bandwidth_hz = 1.0;

  static PowerProblem build(const SystemParams& params, const OnOffVector& onoff,
                            double gain_over_noise);
};

/// sqrt(p) * effective / |effective|; throws std::domain_error on a zero channel.
Eigen::VectorXcd mrt_beamformer(const Eigen::VectorXcd& effective, double p);

/// One SCA step: c = U (g + U^H v_prev), v_q = c_q / |c_q| (previous phase
/// kept where c_q = 0).
Eigen::VectorXcd sca_phase_step(const Eigen::VectorXcd& v_prev,
                                const Eigen::VectorXcd& g,
                                const Eigen::MatrixXcd& cascade);

struct PhaseOptResult {
  Eigen::VectorXcd v;
  std::vector<double> gains;  // |g + U^H v|^2 after every iteration (index 0 = v0)
  int iterations = 0;
  bool converged = false;
};

/// Fixed-point SCA loop on the channel gain |g + U^H v|^2; monotone
/// non-decreasing, stops on relative gain change <= tolerance.
PhaseOptResult optimize_phases(const Eigen::VectorXcd& g,
                               const Eigen::MatrixXcd& cascade,
                               const Eigen::VectorXcd& v0,
                               const numerics::SolverOptions& options);

/// Closed-form EE-optimal transmit power clamp(pbar, p_min, p_max) with
/// pbar = (e^{1 + W(u)} - 1) / gbar, u = (gbar P_0 - mu) / (mu e).
/// Throws InfeasibleError when p_min > p_max.
double optimal_power(const PowerProblem& problem);

/// Channel-gain expansion over binary on-off vectors:
/// |g^H + sum_l x_l h_l^H Theta_l G_l|^2 = d0 + sum_l d_l x_l + sum_{l>m} d_lm x_l x_m.
struct OnOffQuadratic {
  double d0 = 0.0;
  Eigen::VectorXd d;       // length L
  Eigen::MatrixXd dcross;  // strictly lower triangular (l > m)

  double evaluate(const OnOffVector& x) const;
  int ris_count() const { return static_cast<int>(d.size()); }
};

OnOffQuadratic build_onoff_quadratic(const ChannelSet& channels,
                                     const PhaseConfig& phases);

/// Multipliers and auxiliaries of the relaxed on-off dual.
struct DualState {
  double alpha = 0.0;
  Eigen::VectorXd kappa1, kappa2, kappa3;  // one entry per pair (l > m)
  double lambda = 0.0;                     // Dinkelbach parameter (bit/Joule)
  double y = 0.0;                          // auxiliary gain variable
  Eigen::VectorXd z;                       // bilinear auxiliaries in [0,1]
};

struct DualInnerResult {
  OnOffVector x;                    // best primal-feasible recovery (binary)
  double y = 0.0;                   // gain at x
  Eigen::VectorXd z;                // z_lm = x_l x_m at x
  DualState dual;
  double lagrangian_objective = 0.0;  // rate(x) - lambda * power(x), bit/s
  int iterations = 0;
  bool converged = false;
};

/// Inner loop of the dual method for fixed lambda: alternates threshold-based
/// primal recovery with projected-subgradient multiplier updates. Pair (l,m),
/// l > m, contributes (kappa2 - kappa1) to C_l and (kappa3 - kappa1) to C_m.
DualInnerResult dual_onoff_inner(const OnOffQuadratic& quad, double lambda,
                                 double p1, const SystemParams& params,
                                 const numerics::SolverOptions& options,
                                 const OnOffVector* incumbent = nullptr);

struct OnOffResult {
  OnOffVector x;
  double lambda = 0.0;     // final Dinkelbach parameter = EE of x
  double h_final = 0.0;    // H(lambda) at termination
  double h_epsilon = 0.0;  // stopping threshold actually used
  int dinkelbach_iterations = 0;
  bool used_fallback = false;  // exhaustive fallback taken (L <= 12)
  bool converged = true;
};

/// Dinkelbach loop around dual_onoff_inner; exhaustive fallback on inner
/// non-convergence for L <= 12.
OnOffResult dinkelbach_onoff(const OnOffQuadratic& quad, double p1,
                             const SystemParams& params,
                             const numerics::SolverOptions& options,
                             const OnOffVector* incumbent = nullptr);

struct SingleUserResult {
  OperatingPoint point;
  std::vector<double> ee_trajectory;  // EE after each outer iteration
  int outer_iterations = 0;
  bool converged = false;
  int fallback_count = 0;  // exhaustive on-off fallbacks across outer loop
};

/// Outer alternation: phases (SCA) -> power (closed form) -> on-off
/// (dual + Dinkelbach), repeated until the EE stabilizes. Throws
/// InfeasibleError when even the all-on full-power configuration misses R_1.
SingleUserResult optimize_single_user(const ChannelSet& channels,
                                      const SystemParams& params,
                                      const numerics::SolverOptions& options,
                                      const Eigen::VectorXcd* v0 = nullptr,
                                      const OnOffVector* x0 = nullptr);

}  // namespace risee::single_user
