#include "risee/single_user.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "risee/errors.hpp"
#include "risee/oracles.hpp"

namespace risee::single_user {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double log2_1p(double x) { return std::log1p(x) / kLn2; }

/// P_1 + P_B + sum_l x_l N_l P_R for the single-user power model.
double static_power(const SystemParams& params, const OnOffVector& onoff) {
  double p = params.p_user_w[0] + params.p_bs_w;
  for (int l = 0; l < params.num_ris; ++l) {
    if (onoff.x[l]) p += params.elements_per_ris[l] * params.p_ris_element_w;
  }
  return p;
}

}  // namespace

PowerProblem PowerProblem::build(const SystemParams& params, const OnOffVector& onoff,
                                 double gain_over_noise) {
  PowerProblem p;
  p.gbar = gain_over_noise;
  p.p_static = static_power(params, onoff);
  p.mu = params.amplifier_inefficiency;
  p.p_max = params.p_max_w;
  p.bandwidth_hz = params.bandwidth_hz;
  if (gain_over_noise > 0.0) {
    p.p_min = (std::exp2(params.min_rates_bps[0] / params.bandwidth_hz) - 1.0) /
              gain_over_noise;
  } else {
    p.p_min = std::numeric_limits<double>::infinity();
  }
  return p;
}

Eigen::VectorXcd mrt_beamformer(const Eigen::VectorXcd& effective, double p) {
  const double norm = effective.norm();
  if (!(norm > 0.0)) {
    throw std::domain_error("mrt_beamformer: zero effective channel");
  }
  if (p < 0.0) {
    throw std::domain_error("mrt_beamformer: negative power");
  }
  return (std::sqrt(p) / norm) * effective;
}

Eigen::VectorXcd sca_phase_step(const Eigen::VectorXcd& v_prev,
                                const Eigen::VectorXcd& g,
                                const Eigen::MatrixXcd& cascade) {
  const Eigen::VectorXcd c = cascade * (g + cascade.adjoint() * v_prev);
  Eigen::VectorXcd v(v_prev.size());
  for (int q = 0; q < c.size(); ++q) {
    const double mag = std::abs(c[q]);
    v[q] = (mag > 0.0) ? c[q] / mag : v_prev[q];
  }
  return v;
}

PhaseOptResult optimize_phases(const Eigen::VectorXcd& g,
                               const Eigen::MatrixXcd& cascade,
                               const Eigen::VectorXcd& v0,
                               const numerics::SolverOptions& options) {
  PhaseOptResult result;
  result.v = v0;
  auto gain_of = [&](const Eigen::VectorXcd& v) {
    return (g + cascade.adjoint() * v).squaredNorm();
  };
  double gain = gain_of(result.v);
  result.gains.push_back(gain);

  for (int n = 1; n <= options.max_iterations; ++n) {
    result.v = sca_phase_step(result.v, g, cascade);
    const double next = gain_of(result.v);
    result.gains.push_back(next);
    result.iterations = n;
    if (std::abs(next - gain) <= options.tolerance * std::max(next, 1e-300)) {
      result.converged = true;
      gain = next;
      break;
    }
    gain = next;
  }
  return result;
}

double optimal_power(const PowerProblem& problem) {
  if (!(problem.gbar > 0.0)) {
    throw std::invalid_argument("optimal_power: gbar must be positive");
  }
  if (problem.p_min > problem.p_max) {
    throw InfeasibleError("optimal_power: rate demand unattainable (p_min > p_max)");
  }

  // pbar solves gbar (mu p + P0) = mu (1 + gbar p) ln(1 + gbar p). Writing
  // u = (gbar P0 - mu) / (mu e) the root is pbar = (e^{1 + W(u)} - 1) / gbar,
  // which stays finite as u -> 0.
  const double u = (problem.gbar * problem.p_static - problem.mu) / (problem.mu * M_E);
  double pbar = (std::exp(1.0 + numerics::lambert_w0(u)) - 1.0) / problem.gbar;

  // One Newton polish on f1 removes the last few ulps of Lambert-W error.
  const double gp = problem.gbar * pbar;
  const double f1 = problem.gbar * (problem.mu * pbar + problem.p_static) -
                    problem.mu * (1.0 + gp) * std::log1p(gp);
  const double df1 = -problem.mu * problem.gbar * std::log1p(gp);
  if (df1 != 0.0 && std::isfinite(f1 / df1)) {
    pbar -= f1 / df1;
  }

  return std::min(std::max(pbar, problem.p_min), problem.p_max);
}

double OnOffQuadratic::evaluate(const OnOffVector& onoff) const {
  const int ris_count = this->ris_count();
  double value = d0;
  for (int l = 0; l < ris_count; ++l) {
    if (!onoff.x[l]) continue;
    value += d[l];
    for (int m = 0; m < l; ++m) {
      if (onoff.x[m]) value += dcross(l, m);
    }
  }
  return value;
}

OnOffQuadratic build_onoff_quadratic(const ChannelSet& channels,
                                     const PhaseConfig& phases) {
  const int ris_count = static_cast<int>(channels.bs_ris.size());
  const Eigen::VectorXcd& g = channels.g[0];

  // a_l = G_l^H Theta_l^H h_1l; the channel gain is |g + sum_l x_l a_l|^2.
  std::vector<Eigen::VectorXcd> a(ris_count);
  for (int l = 0; l < ris_count; ++l) {
    const Eigen::VectorXcd s = phases.ris_coefficients(l);
    a[l] = channels.bs_ris[l].adjoint() * (s.conjugate().cwiseProduct(channels.h[0][l]));
  }

  OnOffQuadratic quad;
  quad.d0 = g.squaredNorm();
  quad.d.resize(ris_count);
  quad.dcross = Eigen::MatrixXd::Zero(ris_count, ris_count);
  for (int l = 0; l < ris_count; ++l) {
    quad.d[l] = a[l].squaredNorm() + 2.0 * std::real(g.dot(a[l]));
    for (int m = 0; m < l; ++m) {
      quad.dcross(l, m) = 2.0 * std::real(a[l].dot(a[m]));
    }
  }
  return quad;
}

namespace {

/// Pair (l, m), l > m, enumerated lexicographically; pair p contributes
/// (kappa2[p] - kappa1[p]) to C_l and (kappa3[p] - kappa1[p]) to C_m.
struct PairIndex {
  std::vector<std::pair<int, int>> pairs;

  explicit PairIndex(int ris_count) {
    for (int l = 1; l < ris_count; ++l) {
      for (int m = 0; m < l; ++m) pairs.emplace_back(l, m);
    }
  }
  int count() const { return static_cast<int>(pairs.size()); }
};

struct NormalizedOnOff {
  double d0 = 0.0;
  Eigen::VectorXd d;
  Eigen::MatrixXd dcross;
  double scale = 1.0;     // raw gain units per normalized unit
  double p_tilde = 0.0;   // p1 * scale / sigma^2
  double u_floor = 0.0;   // normalized rate-floor gain
  double u_cap = 0.0;

  double gain(const OnOffVector& x) const {
    const int ris_count = static_cast<int>(d.size());
    double value = d0;
    for (int l = 0; l < ris_count; ++l) {
      if (!x.x[l]) continue;
      value += d[l];
      for (int m = 0; m < l; ++m) {
        if (x.x[m]) value += dcross(l, m);
      }
    }
    return value;
  }
};

NormalizedOnOff normalize_quadratic(const OnOffQuadratic& quad, double p1,
                                    const SystemParams& params) {
  NormalizedOnOff n;
  const double floor_gain_raw =
      (std::exp2(params.min_rates_bps[0] / params.bandwidth_hz) - 1.0) *
      params.noise_w / p1;
  double magnitude = std::abs(quad.d0);
  for (int l = 0; l < quad.ris_count(); ++l) {
    magnitude += std::abs(quad.d[l]);
    for (int m = 0; m < l; ++m) magnitude += std::abs(quad.dcross(l, m));
  }
  n.scale = std::max({magnitude, floor_gain_raw, 1e-300});
  n.d0 = quad.d0 / n.scale;
  n.d = quad.d / n.scale;
  n.dcross = quad.dcross / n.scale;
  n.p_tilde = p1 * n.scale / params.noise_w;
  n.u_floor = floor_gain_raw / n.scale;
  n.u_cap = std::max(1.0, n.u_floor) + 1.0;
  return n;
}

struct Recovery {
  OnOffVector x;
  Eigen::VectorXd z;
  double u = 0.0;
  double dual_value = 0.0;
};

Recovery recover_primal(const NormalizedOnOff& norm, const PairIndex& idx,
                        const Eigen::VectorXd& mult, double lambda_hz,
                        const SystemParams& params, double p1) {
  const int ris_count = static_cast<int>(norm.d.size());
  const int pair_count = idx.count();
  const double alpha = mult[0];

  Recovery rec;
  rec.x.x.assign(ris_count, 0);
  rec.z = Eigen::VectorXd::Zero(pair_count);

  Eigen::VectorXd coeff = Eigen::VectorXd::Zero(ris_count);
  for (int l = 0; l < ris_count; ++l) {
    coeff[l] = -lambda_hz * params.elements_per_ris[l] * params.p_ris_element_w +
               alpha * norm.d[l];
  }
  for (int p = 0; p < pair_count; ++p) {
    const auto [l, m] = idx.pairs[p];
    const double k1 = mult[1 + p];
    const double k2 = mult[1 + pair_count + p];
    const double k3 = mult[1 + 2 * pair_count + p];
    coeff[l] += k2 - k1;
    coeff[m] += k3 - k1;
  }
  for (int l = 0; l < ris_count; ++l) {
    rec.x.x[l] = coeff[l] > 0.0 ? 1 : 0;  // ties save power: off
  }
  for (int p = 0; p < pair_count; ++p) {
    const auto [l, m] = idx.pairs[p];
    const double k1 = mult[1 + p];
    const double k2 = mult[1 + pair_count + p];
    const double k3 = mult[1 + 2 * pair_count + p];
    rec.z[p] = (alpha * norm.dcross(l, m) + k1 - k2 - k3) > 0.0 ? 1.0 : 0.0;
  }

  if (alpha > 1e-300) {
    rec.u = 1.0 / (alpha * kLn2) - 1.0 / norm.p_tilde;
  } else {
    rec.u = norm.u_cap;
  }
  rec.u = std::min(std::max(rec.u, norm.u_floor), norm.u_cap);

  // Lagrangian value at the recovered primal.
  double gain_expr = norm.d0;
  double power_static = params.p_user_w[0] + params.p_bs_w;
  for (int l = 0; l < ris_count; ++l) {
    if (rec.x.x[l]) {
      gain_expr += norm.d[l];
      power_static += params.elements_per_ris[l] * params.p_ris_element_w;
    }
  }
  double value = log2_1p(norm.p_tilde * rec.u) -
                 lambda_hz * (params.amplifier_inefficiency * p1 + power_static);
  for (int p = 0; p < pair_count; ++p) {
    const auto [l, m] = idx.pairs[p];
    gain_expr += norm.dcross(l, m) * rec.z[p];
    const double k1 = mult[1 + p];
    const double k2 = mult[1 + pair_count + p];
    const double k3 = mult[1 + 2 * pair_count + p];
    value += k1 * (rec.z[p] - rec.x.x[l] - rec.x.x[m] + 1.0);
    value += k2 * (rec.x.x[l] - rec.z[p]);
    value += k3 * (rec.x.x[m] - rec.z[p]);
  }
  value += alpha * (gain_expr - rec.u);
  rec.dual_value = value;
  return rec;
}

}  // namespace

DualInnerResult dual_onoff_inner(const OnOffQuadratic& quad, double lambda,
                                 double p1, const SystemParams& params,
                                 const numerics::SolverOptions& options,
                                 const OnOffVector* incumbent) {
  if (!(p1 > 0.0)) throw std::invalid_argument("dual_onoff_inner: p1 must be positive");
  if (lambda < 0.0) throw std::invalid_argument("dual_onoff_inner: lambda must be >= 0");

  const int ris_count = quad.ris_count();
  const PairIndex idx(ris_count);
  const int pair_count = idx.count();
  const NormalizedOnOff norm = normalize_quadratic(quad, p1, params);
  const double lambda_hz = lambda / params.bandwidth_hz;
  const double mu_p1 = params.amplifier_inefficiency * p1;

  // Incumbent tracking: best feasible binary x by the lambda-objective.
  struct Best {
    bool found = false;
    OnOffVector x;
    double objective = -std::numeric_limits<double>::infinity();
  } best;
  auto lambda_objective = [&](const OnOffVector& x) {
    const double gain = norm.gain(x);
    double power = mu_p1 + params.p_user_w[0] + params.p_bs_w;
    for (int l = 0; l < ris_count; ++l) {
      if (x.x[l]) power += params.elements_per_ris[l] * params.p_ris_element_w;
    }
    return log2_1p(norm.p_tilde * gain) - lambda_hz * power;
  };
  auto consider = [&](const OnOffVector& x) {
    if (norm.gain(x) < norm.u_floor * (1.0 - 1e-9)) return;
    const double obj = lambda_objective(x);
    if (!best.found || obj > best.objective) {
      best.found = true;
      best.x = x;
      best.objective = obj;
    }
  };
  if (incumbent != nullptr) consider(*incumbent);

  const int dim = 1 + 3 * pair_count;
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(dim);
  // Warm-start alpha at the rate derivative of the seed (or all-on) gain.
  {
    const OnOffVector x_seed = incumbent ? *incumbent : OnOffVector::all_on(ris_count);
    const double g0 = std::max(norm.gain(x_seed), norm.u_floor);
    m0[0] = norm.p_tilde / ((1.0 + norm.p_tilde * g0) * kLn2);
  }

  auto value_fn = [&](const Eigen::VectorXd& mult) {
    return recover_primal(norm, idx, mult, lambda_hz, params, p1).dual_value;
  };
  auto grad_fn = [&](const Eigen::VectorXd& mult) {
    const Recovery rec = recover_primal(norm, idx, mult, lambda_hz, params, p1);
    consider(rec.x);
    Eigen::VectorXd grad(dim);
    double gain_expr = norm.d0;
    for (int l = 0; l < ris_count; ++l) {
      if (rec.x.x[l]) gain_expr += norm.d[l];
    }
    for (int p = 0; p < pair_count; ++p) {
      const auto [l, m] = idx.pairs[p];
      gain_expr += norm.dcross(l, m) * rec.z[p];
      grad[1 + p] = rec.z[p] - rec.x.x[l] - rec.x.x[m] + 1.0;
      grad[1 + pair_count + p] = rec.x.x[l] - rec.z[p];
      grad[1 + 2 * pair_count + p] = rec.x.x[m] - rec.z[p];
    }
    grad[0] = gain_expr - rec.u;
    return grad;
  };
  auto project = [](Eigen::VectorXd v) { return v.cwiseMax(0.0).eval(); };

  // The incumbent drives the outcome; the dual value only needs to stabilize,
  // so the window tolerance is looser than the caller's EE tolerance.
  numerics::SolverOptions sub_options = options;
  sub_options.tolerance = std::max(options.tolerance, 1e-5);
  sub_options.max_iterations = std::max(options.max_iterations, 200 + 40 * dim);
  const auto sub =
      numerics::projected_subgradient(m0, value_fn, grad_fn, project, sub_options);

  DualInnerResult result;
  result.iterations = sub.iterations;
  const Recovery final_rec =
      recover_primal(norm, idx, sub.point, lambda_hz, params, p1);
  consider(final_rec.x);

  // Flip polish of the incumbent: the subgradient trajectory lands on the
  // optimal face but can leave the best vertex a flip or a swap away.
  if (best.found) {
    auto try_candidate = [&](OnOffVector cand) {
      if (norm.gain(cand) < norm.u_floor * (1.0 - 1e-9)) return false;
      const double obj = lambda_objective(cand);
      if (obj > best.objective) {
        best.objective = obj;
        best.x = std::move(cand);
        return true;
      }
      return false;
    };
    bool improved = true;
    while (improved) {
      improved = false;
      for (int l = 0; l < ris_count; ++l) {
        OnOffVector cand = best.x;
        cand.x[l] = cand.x[l] ? 0 : 1;
        improved = try_candidate(std::move(cand)) || improved;
      }
      if (!improved) {
        for (int l = 1; l < ris_count && !improved; ++l) {
          for (int m = 0; m < l && !improved; ++m) {
            OnOffVector cand = best.x;
            cand.x[l] = cand.x[l] ? 0 : 1;
            cand.x[m] = cand.x[m] ? 0 : 1;
            improved = try_candidate(std::move(cand));
          }
        }
      }
    }
  }
  result.converged = sub.converged && best.found;

  if (!best.found) {
    // No feasible binary vector was ever recovered; report the raw recovery.
    result.x = final_rec.x;
    result.converged = false;
  } else {
    result.x = best.x;
  }
  result.y = quad.evaluate(result.x);
  result.z = Eigen::VectorXd::Zero(pair_count);
  for (int p = 0; p < pair_count; ++p) {
    const auto [l, m] = idx.pairs[p];
    result.z[p] = result.x.x[l] && result.x.x[m] ? 1.0 : 0.0;
  }
  result.lagrangian_objective =
      best.found ? best.objective * params.bandwidth_hz
                 : -std::numeric_limits<double>::infinity();

  result.dual.alpha = sub.point[0] * params.bandwidth_hz / norm.scale;
  result.dual.kappa1 = sub.point.segment(1, pair_count) * params.bandwidth_hz;
  result.dual.kappa2 = sub.point.segment(1 + pair_count, pair_count) * params.bandwidth_hz;
  result.dual.kappa3 = sub.point.segment(1 + 2 * pair_count, pair_count) * params.bandwidth_hz;
  result.dual.lambda = lambda;
  result.dual.y = result.y;
  result.dual.z = result.z;
  return result;
}

namespace {

double onoff_ee(const OnOffQuadratic& quad, const OnOffVector& x, double p1,
                const SystemParams& params) {
  const double gain = quad.evaluate(x);
  const double rate =
      params.bandwidth_hz * log2_1p(p1 * gain / params.noise_w);
  const double power = params.amplifier_inefficiency * p1 + static_power(params, x);
  return rate / power;
}

bool onoff_feasible(const OnOffQuadratic& quad, const OnOffVector& x, double p1,
                    const SystemParams& params) {
  const double floor_gain =
      (std::exp2(params.min_rates_bps[0] / params.bandwidth_hz) - 1.0) *
      params.noise_w / p1;
  return quad.evaluate(x) >= floor_gain * (1.0 - 1e-9);
}

}  // namespace

OnOffResult dinkelbach_onoff(const OnOffQuadratic& quad, double p1,
                             const SystemParams& params,
                             const numerics::SolverOptions& options,
                             const OnOffVector* incumbent) {
  const int ris_count = quad.ris_count();

  OnOffVector current = incumbent ? *incumbent : OnOffVector::all_on(ris_count);
  if (!onoff_feasible(quad, current, p1, params)) {
    current = OnOffVector::all_on(ris_count);
    if (!onoff_feasible(quad, current, p1, params)) {
      throw InfeasibleError("dinkelbach_onoff: no feasible on-off vector");
    }
  }

  OnOffResult result;
  result.h_epsilon = options.tolerance * std::max(1.0, params.bandwidth_hz);
  double lambda = onoff_ee(quad, current, p1, params);

  auto fallback = [&]() {
    auto evaluate = [&](const OnOffVector& x) -> std::optional<double> {
      if (!onoff_feasible(quad, x, p1, params)) return std::nullopt;
      return onoff_ee(quad, x, p1, params);
    };
    const auto oracle = oracles::exhaustive_onoff(evaluate, ris_count);
    result.x = oracle.x;
    result.lambda = oracle.value;
    result.used_fallback = true;
    result.converged = true;
    result.h_final = 0.0;
    return result;
  };

  constexpr int kMaxLambdaUpdates = 100;
  for (int it = 1; it <= kMaxLambdaUpdates; ++it) {
    const auto inner = dual_onoff_inner(quad, lambda, p1, params, options, &current);
    result.dinkelbach_iterations = it;
    if (!inner.converged) {
      if (ris_count <= 12) return fallback();
      result.x = current;
      result.lambda = lambda;
      result.converged = false;
      return result;
    }
    current = inner.x;
    result.h_final = inner.lagrangian_objective;
    lambda = onoff_ee(quad, current, p1, params);
    if (result.h_final < result.h_epsilon) {
      result.converged = true;
      break;
    }
  }
  result.x = current;
  result.lambda = lambda;
  if (result.h_final >= result.h_epsilon) {
    if (ris_count <= 12) return fallback();
    result.converged = false;
  }
  return result;
}

SingleUserResult optimize_single_user(const ChannelSet& channels,
                                      const SystemParams& params,
                                      const numerics::SolverOptions& options,
                                      const Eigen::VectorXcd* v0,
                                      const OnOffVector* x0) {
  params.validate();
  if (params.num_users != 1) {
    throw std::invalid_argument("optimize_single_user: requires K = 1");
  }
  const int ris_count = params.num_ris;
  const int q = params.total_elements();
  const Eigen::VectorXcd& g = channels.g[0];
  const double sigma2 = params.noise_w;

  Eigen::VectorXcd v = v0 ? *v0 : Eigen::VectorXcd::Ones(q);
  OnOffVector onoff = x0 ? *x0 : OnOffVector::all_on(ris_count);

  // Feasibility gate: all-on, optimized phases, full power must reach R_1.
  const OnOffVector all_on = OnOffVector::all_on(ris_count);
  const Eigen::MatrixXcd cascade_all = build_cascade_matrix(channels, all_on, 0);
  const auto phase_all =
      optimize_phases(g, cascade_all, Eigen::VectorXcd::Ones(q), options);
  const double best_gain_all = phase_all.gains.back();
  const double max_rate =
      params.bandwidth_hz * log2_1p(params.p_max_w * best_gain_all / sigma2);
  if (max_rate < params.min_rates_bps[0] * (1.0 - 1e-6)) {
    throw InfeasibleError("optimize_single_user: demand misses even at all-on full power");
  }

  SingleUserResult result;
  double ee_prev = -std::numeric_limits<double>::infinity();
  double p1 = params.p_max_w;
  constexpr int kMaxOuter = 50;
  bool recovered_once = false;

  for (int outer = 1; outer <= kMaxOuter; ++outer) {
    const Eigen::MatrixXcd cascade = build_cascade_matrix(channels, onoff, 0);
    const auto phase_result = optimize_phases(g, cascade, v, options);
    v = phase_result.v;
    const double gain = phase_result.gains.back();

    PowerProblem power_problem = PowerProblem::build(params, onoff, gain / sigma2);
    if (power_problem.p_min > power_problem.p_max) {
      if (recovered_once) {
        throw InfeasibleError("optimize_single_user: lost feasibility during alternation");
      }
      // The current on-off vector cannot carry the demand; restart from the
      // all-on configuration whose feasibility was checked above.
      recovered_once = true;
      onoff = all_on;
      v = phase_all.v;
      continue;
    }
    p1 = optimal_power(power_problem);

    const PhaseConfig phases =
        PhaseConfig::from_conj_stack(v, params.elements_per_ris);
    const OnOffQuadratic quad = build_onoff_quadratic(channels, phases);
    const auto onoff_result = dinkelbach_onoff(quad, p1, params, options, &onoff);
    onoff = onoff_result.x;
    if (onoff_result.used_fallback) ++result.fallback_count;

    const double ee = onoff_ee(quad, onoff, p1, params);
    result.ee_trajectory.push_back(ee);
    result.outer_iterations = outer;
    if (std::abs(ee - ee_prev) <= options.tolerance * std::max(ee, 1e-300)) {
      result.converged = true;
      break;
    }
    ee_prev = ee;
  }

  const PhaseConfig phases = PhaseConfig::from_conj_stack(v, params.elements_per_ris);
  const Eigen::VectorXcd ghat = effective_channel(channels, phases, onoff, 0);
  Beamformers beams;
  beams.w.push_back(mrt_beamformer(ghat, p1));
  result.point = evaluate_operating_point(params, channels, phases, onoff, beams);
  return result;
}

}  // namespace risee::single_user
