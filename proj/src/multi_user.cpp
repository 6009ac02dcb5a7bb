#include "risee/multi_user.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "risee/errors.hpp"

namespace risee::multi_user {

namespace {

constexpr double kLn2 = 0.6931471805599453;

double log2_1p(double x) { return std::log1p(x) / kLn2; }

/// Complex affine form t^H s + c over a real-embedded slice of the decision
/// vector: Re(s) at [a_off, a_off+Q), Im(s) at [b_off, b_off+Q).
struct AffineTerm {
  Eigen::VectorXd re_grad;
  Eigen::VectorXd im_grad;
  double re0 = 0.0;
  double im0 = 0.0;

  static AffineTerm make(const Eigen::VectorXcd& t, std::complex<double> c,
                         int dim, int a_off, int b_off) {
    AffineTerm a;
    a.re_grad = Eigen::VectorXd::Zero(dim);
    a.im_grad = Eigen::VectorXd::Zero(dim);
    for (int q = 0; q < t.size(); ++q) {
      // t^H s = (tr^T a + ti^T b) + j (tr^T b - ti^T a)
      a.re_grad[a_off + q] = t[q].real();
      a.re_grad[b_off + q] = t[q].imag();
      a.im_grad[a_off + q] = -t[q].imag();
      a.im_grad[b_off + q] = t[q].real();
    }
    a.re0 = c.real();
    a.im0 = c.imag();
    return a;
  }

  double re(const Eigen::VectorXd& x) const { return re_grad.dot(x) + re0; }
  double im(const Eigen::VectorXd& x) const { return im_grad.dot(x) + im0; }
  double abs2(const Eigen::VectorXd& x) const {
    const double r = re(x);
    const double i = im(x);
    return r * r + i * i;
  }
  void add_abs2_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
    g.noalias() += (2.0 * re(x)) * re_grad + (2.0 * im(x)) * im_grad;
  }
  void add_abs2_hessian(Eigen::MatrixXd& h) const {
    h.noalias() += 2.0 * (re_grad * re_grad.transpose() + im_grad * im_grad.transpose());
  }
};

double rate_floor(const SystemParams& params, int user) {
  return std::exp2(params.min_rates_bps[user] / params.bandwidth_hz) - 1.0;
}

bool rates_feasible(const SystemParams& params, const OperatingPoint& point) {
  for (int k = 0; k < params.num_users; ++k) {
    const double demand = params.min_rates_bps[k];
    if (point.rates_bps[k] < demand - 1e-6 * demand) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Phase subproblem
// ---------------------------------------------------------------------------

struct PhaseData {
  int users = 0;
  int q_total = 0;
  int dim = 0;  // 2Q + 2K
  // Normalized cascades t_ki / sigma and direct terms g_k^H w_i / sigma.
  std::vector<std::vector<Eigen::VectorXcd>> t;       // [k][i]
  std::vector<std::vector<std::complex<double>>> gw;  // [k][i]
  std::vector<double> floors;

  int a_off() const { return 0; }
  int b_off() const { return q_total; }
  int eta_off() const { return 2 * q_total; }
  int beta_off() const { return 2 * q_total + users; }

  Eigen::VectorXcd s_of(const Eigen::VectorXd& x) const {
    Eigen::VectorXcd s(q_total);
    for (int q = 0; q < q_total; ++q) {
      s[q] = {x[a_off() + q], x[b_off() + q]};
    }
    return s;
  }
};

PhaseData build_phase_data(const ChannelSet& channels, const Beamformers& beams,
                           const OnOffVector& onoff, const SystemParams& params) {
  PhaseData data;
  data.users = params.num_users;
  data.q_total = params.total_elements();
  data.dim = 2 * data.q_total + 2 * data.users;
  const double sigma = std::sqrt(params.noise_w);

  data.t.assign(data.users, std::vector<Eigen::VectorXcd>(data.users));
  data.gw.assign(data.users, std::vector<std::complex<double>>(data.users));
  for (int k = 0; k < data.users; ++k) {
    for (int i = 0; i < data.users; ++i) {
      Eigen::VectorXcd t(data.q_total);
      int offset = 0;
      for (int l = 0; l < params.num_ris; ++l) {
        const int n = params.elements_per_ris[l];
        if (onoff.x[l]) {
          // t_kli = (diag(h_kl^H) G_l w_i)^* = h_kl .* conj(G_l w_i)
          const Eigen::VectorXcd gw = channels.bs_ris[l] * beams.w[i];
          t.segment(offset, n) =
              channels.h[k][l].cwiseProduct(gw.conjugate()) / sigma;
        } else {
          t.segment(offset, n).setZero();
        }
        offset += n;
      }
      data.t[k][i] = std::move(t);
      data.gw[k][i] = channels.g[k].dot(beams.w[i]) / sigma;
    }
  }
  data.floors.resize(data.users);
  for (int k = 0; k < data.users; ++k) data.floors[k] = rate_floor(params, k);
  return data;
}

double phase_signal(const PhaseData& data, const Eigen::VectorXcd& s, int k) {
  return std::norm(data.t[k][k].dot(s) + data.gw[k][k]);
}

double phase_interference(const PhaseData& data, const Eigen::VectorXcd& s, int k) {
  double v = 0.0;
  for (int i = 0; i < data.users; ++i) {
    if (i == k) continue;
    v += std::norm(data.t[k][i].dot(s) + data.gw[k][i]);
  }
  return v;
}

}  // namespace

PhaseSubproblemState solve_phase_subproblem(const PhaseSubproblemState& state,
                                            const ChannelSet& channels,
                                            const Beamformers& beams,
                                            const OnOffVector& onoff,
                                            const SystemParams& params,
                                            const numerics::SolverOptions& options,
                                            double penalty_c) {
  const PhaseData data = build_phase_data(channels, beams, onoff, params);
  const int users = data.users;
  const int q_total = data.q_total;
  const int dim = data.dim;
  const double sigma2 = params.noise_w;

  // --- Build a strictly feasible start; reuse the state verbatim when it
  // already sits strictly inside its own linearized constraint set.
  Eigen::VectorXcd s0 = state.s;
  Eigen::VectorXd eta0 = state.eta;
  Eigen::VectorXd beta0(users);  // normalized by sigma^2
  for (int k = 0; k < users; ++k) beta0[k] = state.beta[k] / sigma2;

  bool as_is = true;
  for (int q = 0; q < q_total && as_is; ++q) {
    if (!(std::norm(s0[q]) < 1.0)) as_is = false;
  }
  for (int k = 0; k < users && as_is; ++k) {
    const double interf = phase_interference(data, s0, k) + 1.0;
    const double signal = phase_signal(data, s0, k);
    if (!(interf < beta0[k])) as_is = false;
    if (!(eta0[k] > data.floors[k])) as_is = false;
    if (!(signal > beta0[k] * eta0[k])) as_is = false;
  }

  if (!as_is) {
    for (int q = 0; q < q_total; ++q) {
      const double mag = std::abs(s0[q]);
      if (mag >= 1.0 - 1e-9) s0[q] *= (1.0 - 1e-7) / std::max(mag, 1e-300);
    }
    for (int k = 0; k < users; ++k) {
      const double interf = phase_interference(data, s0, k) + 1.0;
      const double signal = phase_signal(data, s0, k);
      beta0[k] = interf * (1.0 + 1e-6);
      const double eta_max = signal / beta0[k] * (1.0 - 1e-6);
      const double eta_lo =
          data.floors[k] + std::max(1e-12, data.floors[k] * 1e-9);
      if (!(eta_max > eta_lo)) {
        if (signal >= data.floors[k] * interf * (1.0 - 1e-6)) {
          return state;  // boundary-degenerate: no strictly improving move
        }
        throw InfeasibleError(
            "solve_phase_subproblem: linearization point misses a rate floor");
      }
      eta0[k] = eta_max;
    }
  }

  Eigen::VectorXd x0(dim);
  for (int q = 0; q < q_total; ++q) {
    x0[data.a_off() + q] = s0[q].real();
    x0[data.b_off() + q] = s0[q].imag();
  }
  x0.segment(data.eta_off(), users) = eta0;
  x0.segment(data.beta_off(), users) = beta0;

  // --- Assemble the convex program (all terms linearized at x0).
  auto problem = numerics::ConvexSubproblem::unbounded(dim);
  for (int k = 0; k < users; ++k) {
    problem.lower[data.eta_off() + k] = data.floors[k];
    problem.lower[data.beta_off() + k] = 0.0;
  }

  const double c_pen = penalty_c;
  Eigen::VectorXd pen_grad = Eigen::VectorXd::Zero(dim);
  for (int q = 0; q < q_total; ++q) {
    pen_grad[data.a_off() + q] = 2.0 * c_pen * s0[q].real();
    pen_grad[data.b_off() + q] = 2.0 * c_pen * s0[q].imag();
  }
  const int eta_off = data.eta_off();
  problem.objective.value = [users, eta_off, pen_grad](const Eigen::VectorXd& x) {
    double v = pen_grad.dot(x);
    for (int k = 0; k < users; ++k) v += log2_1p(x[eta_off + k]);
    return v;
  };
  problem.objective.gradient = [users, eta_off, pen_grad](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = pen_grad;
    for (int k = 0; k < users; ++k) {
      g[eta_off + k] += 1.0 / ((1.0 + x[eta_off + k]) * kLn2);
    }
    return g;
  };
  problem.objective.hessian = [users, eta_off, dim](const Eigen::VectorXd& x) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    for (int k = 0; k < users; ++k) {
      const double d = 1.0 + x[eta_off + k];
      h(eta_off + k, eta_off + k) = -1.0 / (d * d * kLn2);
    }
    return h;
  };

  // Unit-disk constraints |s_q|^2 <= 1.
  for (int q = 0; q < q_total; ++q) {
    const int ia = data.a_off() + q;
    const int ib = data.b_off() + q;
    numerics::ConvexSubproblem::Functional f;
    f.value = [ia, ib](const Eigen::VectorXd& x) {
      return x[ia] * x[ia] + x[ib] * x[ib] - 1.0;
    };
    f.gradient = [ia, ib, dim](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
      g[ia] = 2.0 * x[ia];
      g[ib] = 2.0 * x[ib];
      return g;
    };
    f.hessian = [ia, ib, dim](const Eigen::VectorXd&) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
      h(ia, ia) = 2.0;
      h(ib, ib) = 2.0;
      return h;
    };
    problem.constraints.push_back(std::move(f));
  }

  // Interference constraints sum_{i != k} |t_ki^H s + g_ki|^2 + 1 <= beta_k.
  for (int k = 0; k < users; ++k) {
    auto terms = std::make_shared<std::vector<AffineTerm>>();
    for (int i = 0; i < users; ++i) {
      if (i == k) continue;
      terms->push_back(AffineTerm::make(data.t[k][i], data.gw[k][i], dim,
                                        data.a_off(), data.b_off()));
    }
    const int ibeta = data.beta_off() + k;
    auto hess0 = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(dim, dim));
    for (const auto& term : *terms) term.add_abs2_hessian(*hess0);

    numerics::ConvexSubproblem::Functional f;
    f.value = [terms, ibeta](const Eigen::VectorXd& x) {
      double v = 1.0 - x[ibeta];
      for (const auto& term : *terms) v += term.abs2(x);
      return v;
    };
    f.gradient = [terms, ibeta, dim](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
      for (const auto& term : *terms) term.add_abs2_gradient(x, g);
      g[ibeta] -= 1.0;
      return g;
    };
    f.hessian = [hess0](const Eigen::VectorXd&) { return *hess0; };
    problem.constraints.push_back(std::move(f));
  }

  // Linearized signal constraints:
  // 1/4 [(beta+eta)^2 - 2(beta0-eta0)(beta-eta) + (beta0-eta0)^2]
  //   <= 2 Re(u0^H (t^H s + g)) - |u0|^2.
  for (int k = 0; k < users; ++k) {
    const AffineTerm sig = AffineTerm::make(data.t[k][k], data.gw[k][k], dim,
                                            data.a_off(), data.b_off());
    const double re_lin = sig.re(x0);
    const double im_lin = sig.im(x0);
    const double sig0 = re_lin * re_lin + im_lin * im_lin;
    auto lin_grad = std::make_shared<Eigen::VectorXd>(
        (2.0 * re_lin) * sig.re_grad + (2.0 * im_lin) * sig.im_grad);
    // lin(x) = lin_grad . x + lin_offset is the Taylor minorant, tight at x0.
    const double lin_offset = sig0 - lin_grad->dot(x0);
    const double d0 = beta0[k] - eta0[k];
    const int ieta = data.eta_off() + k;
    const int ibeta = data.beta_off() + k;

    numerics::ConvexSubproblem::Functional f;
    f.value = [lin_grad, lin_offset, d0, ieta, ibeta](const Eigen::VectorXd& x) {
      const double b = x[ibeta];
      const double e = x[ieta];
      const double rhs = 0.25 * ((b + e) * (b + e) - 2.0 * d0 * (b - e) + d0 * d0);
      return rhs - (lin_grad->dot(x) + lin_offset);
    };
    f.gradient = [lin_grad, d0, ieta, ibeta](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = -*lin_grad;
      const double b = x[ibeta];
      const double e = x[ieta];
      g[ibeta] += 0.5 * (b + e) - 0.5 * d0;
      g[ieta] += 0.5 * (b + e) + 0.5 * d0;
      return g;
    };
    f.hessian = [ieta, ibeta, dim](const Eigen::VectorXd&) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
      h(ibeta, ibeta) = 0.5;
      h(ibeta, ieta) = 0.5;
      h(ieta, ibeta) = 0.5;
      h(ieta, ieta) = 0.5;
      return h;
    };
    problem.constraints.push_back(std::move(f));
  }

  const auto solution = numerics::solve_convex(problem, x0, options);

  PhaseSubproblemState next;
  next.s = data.s_of(solution.point);
  next.eta = solution.point.segment(data.eta_off(), users);
  next.beta = solution.point.segment(data.beta_off(), users) * sigma2;
  return next;
}

namespace {

double penalized_objective(const PhaseData& data, const PhaseSubproblemState& state,
                           double penalty_c) {
  double v = 0.0;
  for (int k = 0; k < data.users; ++k) v += log2_1p(state.eta[k]);
  for (int q = 0; q < data.q_total; ++q) {
    v += penalty_c * (std::norm(state.s[q]) - 1.0);
  }
  return v;
}

Eigen::VectorXcd project_unit_modulus(const Eigen::VectorXcd& s,
                                      const Eigen::VectorXcd& fallback) {
  Eigen::VectorXcd out(s.size());
  for (int q = 0; q < s.size(); ++q) {
    const double mag = std::abs(s[q]);
    out[q] = mag > 1e-12 ? s[q] / mag : fallback[q] / std::abs(fallback[q]);
  }
  return out;
}

}  // namespace

PhaseMuResult optimize_phases_mu(const ChannelSet& channels,
                                 const Beamformers& beams,
                                 const OnOffVector& onoff,
                                 const SystemParams& params,
                                 const PhaseConfig& s0,
                                 const numerics::SolverOptions& options) {
  const PhaseData data = build_phase_data(channels, beams, onoff, params);
  const double sigma2 = params.noise_w;
  constexpr int kMaxRounds = 30;
  constexpr double kPenaltyMax = 1e6;

  PhaseMuResult result;
  result.phases = s0;

  auto evaluate_projected =
      [&](const Eigen::VectorXcd& s_unit) -> std::pair<double, bool> {
    PhaseConfig cand = PhaseConfig::from_coefficients(s_unit, params.elements_per_ris);
    OperatingPoint point =
        evaluate_operating_point(params, channels, cand, onoff, beams);
    return {point.sum_rate_bps, rates_feasible(params, point)};
  };

  const Eigen::VectorXcd s_input = s0.coefficients();
  const auto [input_rate, input_feasible] = evaluate_projected(s_input);
  result.sum_rate_bps = input_rate;

  PhaseSubproblemState state;
  state.s = s_input;
  state.eta.resize(data.users);
  state.beta.resize(data.users);
  for (int k = 0; k < data.users; ++k) {
    const double interf = phase_interference(data, s_input, k) + 1.0;
    state.beta[k] = interf * sigma2;
    state.eta[k] = phase_signal(data, s_input, k) / interf;
  }

  double best_rate = input_feasible ? input_rate : -1.0;
  Eigen::VectorXcd best_s = s_input;
  double penalty = params.penalty_c;

  while (true) {
    double f_prev = penalized_objective(data, state, penalty);
    bool level_converged = false;
    for (int round = 0; round < kMaxRounds; ++round) {
      PhaseSubproblemState next;
      try {
        next = solve_phase_subproblem(state, channels, beams, onoff, params,
                                      options, penalty);
      } catch (const InfeasibleError&) {
        level_converged = true;
        break;
      }
      if ((next.s - state.s).norm() == 0.0 &&
          (next.eta - state.eta).norm() == 0.0) {
        level_converged = true;  // degenerate: no strictly improving move
        break;
      }
      const double f_next = penalized_objective(data, next, penalty);
      result.objective_trajectory.push_back(f_next);
      ++result.iterations;

      const Eigen::VectorXcd s_proj = project_unit_modulus(next.s, s_input);
      const auto [rate, feasible] = evaluate_projected(s_proj);
      if (feasible && rate > best_rate) {
        best_rate = rate;
        best_s = s_proj;
        result.improved = true;
      }

      state = next;
      if (std::abs(f_next - f_prev) <=
          options.tolerance * std::max(1.0, std::abs(f_next))) {
        level_converged = true;
        break;
      }
      f_prev = f_next;
    }

    double min_mod = 1.0;
    for (int q = 0; q < data.q_total; ++q) {
      min_mod = std::min(min_mod, std::abs(state.s[q]));
    }
    result.min_modulus = min_mod;
    if (!level_converged || min_mod >= 0.99 || penalty >= kPenaltyMax) break;
    penalty = std::min(penalty * 10.0, kPenaltyMax);
  }

  if (best_rate >= 0.0) {
    result.phases = PhaseConfig::from_coefficients(best_s, params.elements_per_ris);
    result.sum_rate_bps = best_rate;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Beamforming subproblem
// ---------------------------------------------------------------------------

namespace {

struct BeamData {
  int users = 0;
  int antennas = 0;
  int dim = 0;  // 2MK + 2K
  std::vector<Eigen::VectorXcd> uhat;  // effective channels * sqrt(Pmax)/sigma
  std::vector<double> floors;
  double p_fixed = 0.0;  // P_B + sum P_k + sum x_l N_l P_R
  double mu_pmax = 0.0;  // mu * P_max

  int w_re_off(int k) const { return 2 * antennas * k; }
  int w_im_off(int k) const { return 2 * antennas * k + antennas; }
  int zeta_off() const { return 2 * antennas * users; }
  int gamma_off() const { return 2 * antennas * users + users; }

  Eigen::VectorXcd w_of(const Eigen::VectorXd& x, int k) const {
    Eigen::VectorXcd w(antennas);
    for (int m = 0; m < antennas; ++m) {
      w[m] = {x[w_re_off(k) + m], x[w_im_off(k) + m]};
    }
    return w;
  }
};

BeamData build_beam_data(const ChannelSet& channels, const PhaseConfig& phases,
                         const OnOffVector& onoff, const SystemParams& params) {
  BeamData data;
  data.users = params.num_users;
  data.antennas = params.num_antennas;
  data.dim = 2 * data.antennas * data.users + 2 * data.users;
  const double scale = std::sqrt(params.p_max_w / params.noise_w);
  data.uhat.resize(data.users);
  data.floors.resize(data.users);
  for (int k = 0; k < data.users; ++k) {
    data.uhat[k] = effective_channel(channels, phases, onoff, k) * scale;
    data.floors[k] = std::max(rate_floor(params, k), 1e-9);
  }
  data.p_fixed = params.p_bs_w;
  for (double pk : params.p_user_w) data.p_fixed += pk;
  for (int l = 0; l < params.num_ris; ++l) {
    if (onoff.x[l]) data.p_fixed += params.elements_per_ris[l] * params.p_ris_element_w;
  }
  data.mu_pmax = params.amplifier_inefficiency * params.p_max_w;
  return data;
}

struct BeamStart {
  Eigen::VectorXd x;        // decision vector
  Eigen::VectorXd zeta0;    // linearization constants
  Eigen::VectorXd gamma0;
  bool degenerate = false;  // no strictly feasible start; return input
};

/// uhat_k^H what_i for normalized beams stored in x.
std::complex<double> beam_inner(const BeamData& data, const Eigen::VectorXd& x,
                                int k, int i) {
  std::complex<double> v = 0.0;
  for (int m = 0; m < data.antennas; ++m) {
    const std::complex<double> w{x[data.w_re_off(i) + m], x[data.w_im_off(i) + m]};
    v += std::conj(data.uhat[k][m]) * w;
  }
  return v;
}

BeamStart build_beam_start(const BeamData& data, const BeamSubproblemState& state,
                           const SystemParams& params) {
  const int users = data.users;
  const int antennas = data.antennas;
  BeamStart start;
  start.x = Eigen::VectorXd::Zero(data.dim);

  const double wscale = 1.0 / std::sqrt(params.p_max_w);
  double power = 0.0;
  for (int k = 0; k < users; ++k) power += state.w[k].squaredNorm();
  double shrink = 1.0;
  if (power / params.p_max_w >= 1.0 - 1e-12) {
    shrink = std::sqrt((1.0 - 1e-9) * params.p_max_w / power);
  }
  for (int k = 0; k < users; ++k) {
    // Rotate so uhat_k^H w_k is real nonnegative before linearizing.
    Eigen::VectorXcd w = state.w[k] * (wscale * shrink);
    std::complex<double> inner = 0.0;
    for (int m = 0; m < antennas; ++m) inner += std::conj(data.uhat[k][m]) * w[m];
    if (std::abs(inner) > 0.0) w *= std::polar(1.0, -std::arg(inner));
    for (int m = 0; m < antennas; ++m) {
      start.x[data.w_re_off(k) + m] = w[m].real();
      start.x[data.w_im_off(k) + m] = w[m].imag();
    }
  }

  start.zeta0.resize(users);
  start.gamma0.resize(users);
  const bool have_slacks = state.zeta.size() == users && state.gamma_slack.size() == users;

  // Reuse the incoming slacks when they are already strictly feasible with
  // respect to a linearization at themselves.
  bool as_is = have_slacks && shrink == 1.0;
  if (as_is) {
    for (int k = 0; k < users && as_is; ++k) {
      double interf = 1.0;
      for (int i = 0; i < users; ++i) {
        if (i != k) interf += std::norm(beam_inner(data, start.x, k, i));
      }
      const double re_sig = beam_inner(data, start.x, k, k).real();
      const double gamma_hat = state.gamma_slack[k] / params.noise_w;
      const double zeta = state.zeta[k];
      if (!(interf < gamma_hat)) as_is = false;
      if (!(zeta > data.floors[k])) as_is = false;
      if (!(re_sig > std::sqrt(gamma_hat * zeta))) as_is = false;
    }
    if (as_is) {
      for (int k = 0; k < users; ++k) {
        start.zeta0[k] = state.zeta[k];
        start.gamma0[k] = state.gamma_slack[k] / params.noise_w;
      }
    }
  }

  if (!as_is) {
    for (int k = 0; k < users; ++k) {
      double interf = 1.0;
      for (int i = 0; i < users; ++i) {
        if (i != k) interf += std::norm(beam_inner(data, start.x, k, i));
      }
      const double re_sig = beam_inner(data, start.x, k, k).real();
      const double gamma_hat = interf * (1.0 + 1e-6);
      const double zeta_max = re_sig * re_sig / gamma_hat * (1.0 - 1e-6);
      const double zeta_lo = data.floors[k] * (1.0 + 1e-9) + 1e-12;
      if (!(zeta_max > zeta_lo)) {
        if (re_sig * re_sig >= data.floors[k] * interf * (1.0 - 1e-6)) {
          start.degenerate = true;
          return start;
        }
        throw InfeasibleError(
            "solve_beam_subproblem: linearization point misses a rate floor");
      }
      start.gamma0[k] = gamma_hat;
      start.zeta0[k] = zeta_max;
    }
  }
  start.x.segment(data.zeta_off(), users) = start.zeta0;
  start.x.segment(data.gamma_off(), users) = start.gamma0;
  return start;
}

/// One convex solve at fixed lambda; the linearization constants (zeta0,
/// gamma0) are baked into the constraints and the warm start is x0.
Eigen::VectorXd beam_solve_once(const BeamData& data, double lambda_hz,
                                const Eigen::VectorXd& zeta0,
                                const Eigen::VectorXd& gamma0,
                                const Eigen::VectorXd& x0,
                                const numerics::SolverOptions& options) {
  const int users = data.users;
  const int dim = data.dim;
  const int nw = 2 * data.antennas * users;

  auto problem = numerics::ConvexSubproblem::unbounded(dim);
  for (int k = 0; k < users; ++k) {
    problem.lower[data.zeta_off() + k] = data.floors[k];
  }

  const int zeta_off = data.zeta_off();
  const double mu_pmax = data.mu_pmax;
  const double p_fixed = data.p_fixed;
  problem.objective.value = [users, zeta_off, lambda_hz, mu_pmax, p_fixed,
                             nw](const Eigen::VectorXd& x) {
    double v = -lambda_hz * (mu_pmax * x.head(nw).squaredNorm() + p_fixed);
    for (int k = 0; k < users; ++k) v += log2_1p(x[zeta_off + k]);
    return v;
  };
  problem.objective.gradient = [users, zeta_off, lambda_hz, mu_pmax,
                                nw](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
    g.head(nw) = -2.0 * lambda_hz * mu_pmax * x.head(nw);
    for (int k = 0; k < users; ++k) {
      g[zeta_off + k] = 1.0 / ((1.0 + x[zeta_off + k]) * kLn2);
    }
    return g;
  };
  problem.objective.hessian = [users, zeta_off, lambda_hz, mu_pmax, nw,
                               dim](const Eigen::VectorXd& x) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    h.topLeftCorner(nw, nw).diagonal().setConstant(-2.0 * lambda_hz * mu_pmax);
    for (int k = 0; k < users; ++k) {
      const double d = 1.0 + x[zeta_off + k];
      h(zeta_off + k, zeta_off + k) = -1.0 / (d * d * kLn2);
    }
    return h;
  };

  // Power budget sum_k |what_k|^2 <= 1.
  {
    numerics::ConvexSubproblem::Functional f;
    f.value = [nw](const Eigen::VectorXd& x) { return x.head(nw).squaredNorm() - 1.0; };
    f.gradient = [nw](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
      g.head(nw) = 2.0 * x.head(nw);
      return g;
    };
    f.hessian = [nw, dim](const Eigen::VectorXd&) {
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
      h.topLeftCorner(nw, nw).diagonal().setConstant(2.0);
      return h;
    };
    problem.constraints.push_back(std::move(f));
  }

  // Interference constraints and rotated-real signal constraints.
  for (int k = 0; k < users; ++k) {
    auto terms = std::make_shared<std::vector<AffineTerm>>();
    for (int i = 0; i < users; ++i) {
      if (i == k) continue;
      terms->push_back(AffineTerm::make(data.uhat[k], 0.0, dim, data.w_re_off(i),
                                        data.w_im_off(i)));
    }
    const int igamma = data.gamma_off() + k;
    auto hess0 = std::make_shared<Eigen::MatrixXd>(Eigen::MatrixXd::Zero(dim, dim));
    for (const auto& term : *terms) term.add_abs2_hessian(*hess0);

    numerics::ConvexSubproblem::Functional f;
    f.value = [terms, igamma](const Eigen::VectorXd& x) {
      double v = 1.0 - x[igamma];
      for (const auto& term : *terms) v += term.abs2(x);
      return v;
    };
    f.gradient = [terms, igamma](const Eigen::VectorXd& x) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
      for (const auto& term : *terms) term.add_abs2_gradient(x, g);
      g[igamma] -= 1.0;
      return g;
    };
    f.hessian = [hess0](const Eigen::VectorXd&) { return *hess0; };
    problem.constraints.push_back(std::move(f));

    // sqrt(gamma0 zeta0) + 0.5 sqrt(gamma0/zeta0)(zeta - zeta0)
    //   + 0.5 sqrt(zeta0/gamma0)(gamma - gamma0) <= Re(uhat_k^H what_k)
    const AffineTerm sig = AffineTerm::make(data.uhat[k], 0.0, dim,
                                            data.w_re_off(k), data.w_im_off(k));
    const double z0 = zeta0[k];
    const double g0 = gamma0[k];
    const double root = std::sqrt(g0 * z0);
    const double dz = 0.5 * std::sqrt(g0 / z0);
    const double dg = 0.5 * std::sqrt(z0 / g0);
    const int izeta = data.zeta_off() + k;
    auto re_grad = std::make_shared<Eigen::VectorXd>(sig.re_grad);

    numerics::ConvexSubproblem::Functional s;
    s.value = [re_grad, root, dz, dg, z0, g0, izeta, igamma](const Eigen::VectorXd& x) {
      return root + dz * (x[izeta] - z0) + dg * (x[igamma] - g0) - re_grad->dot(x);
    };
    s.gradient = [re_grad, dz, dg, izeta, igamma](const Eigen::VectorXd&) {
      Eigen::VectorXd g = -*re_grad;
      g[izeta] += dz;
      g[igamma] += dg;
      return g;
    };
    s.hessian = [dim](const Eigen::VectorXd&) {
      return Eigen::MatrixXd::Zero(dim, dim);
    };
    problem.constraints.push_back(std::move(s));
  }

  return numerics::solve_convex(problem, x0, options).point;
}

BeamSubproblemState state_from_vector(const BeamData& data,
                                      const Eigen::VectorXd& x,
                                      const SystemParams& params, double lambda) {
  BeamSubproblemState out;
  out.w.resize(data.users);
  const double wscale = std::sqrt(params.p_max_w);
  for (int k = 0; k < data.users; ++k) {
    Eigen::VectorXcd w = data.w_of(x, k) * wscale;
    // Keep the rotated-real convention on the way out.
    std::complex<double> inner = 0.0;
    for (int m = 0; m < data.antennas; ++m) {
      inner += std::conj(data.uhat[k][m]) * w[m];
    }
    if (std::abs(inner) > 0.0) w *= std::polar(1.0, -std::arg(inner));
    out.w[k] = std::move(w);
  }
  out.zeta = x.segment(data.zeta_off(), data.users);
  out.gamma_slack = x.segment(data.gamma_off(), data.users) * params.noise_w;
  out.lambda = lambda;
  return out;
}

}  // namespace

BeamSubproblemState solve_beam_subproblem_fixed_lambda(
    const BeamSubproblemState& state, double lambda, const ChannelSet& channels,
    const PhaseConfig& phases, const OnOffVector& onoff,
    const SystemParams& params, const numerics::SolverOptions& options) {
  const BeamData data = build_beam_data(channels, phases, onoff, params);
  const BeamStart start = build_beam_start(data, state, params);
  if (start.degenerate) return state;
  const Eigen::VectorXd x = beam_solve_once(data, lambda / params.bandwidth_hz,
                                            start.zeta0, start.gamma0, start.x,
                                            options);
  return state_from_vector(data, x, params, lambda);
}

BeamSubproblemState solve_beam_subproblem(const BeamSubproblemState& state,
                                          const ChannelSet& channels,
                                          const PhaseConfig& phases,
                                          const OnOffVector& onoff,
                                          const SystemParams& params,
                                          const numerics::SolverOptions& options) {
  const BeamData data = build_beam_data(channels, phases, onoff, params);
  const BeamStart start = build_beam_start(data, state, params);
  if (start.degenerate) return state;

  auto rate_hz = [&](const Eigen::VectorXd& x) {
    double r = 0.0;
    for (int k = 0; k < data.users; ++k) r += log2_1p(x[data.zeta_off() + k]);
    return r;
  };
  auto power_of = [&](const Eigen::VectorXd& x) {
    const int nw = 2 * data.antennas * data.users;
    return data.mu_pmax * x.head(nw).squaredNorm() + data.p_fixed;
  };

  Eigen::VectorXd x = start.x;
  double lambda_hz = rate_hz(x) / power_of(x);
  constexpr int kMaxDinkelbach = 30;
  for (int it = 0; it < kMaxDinkelbach; ++it) {
    x = beam_solve_once(data, lambda_hz, start.zeta0, start.gamma0, x, options);
    const double rate = rate_hz(x);
    const double power = power_of(x);
    const double h = rate - lambda_hz * power;
    lambda_hz = rate / power;
    if (h < options.tolerance * std::max(1.0, rate)) break;
  }
  return state_from_vector(data, x, params, lambda_hz * params.bandwidth_hz);
}

// ---------------------------------------------------------------------------
// Greedy on-off search and the outer alternation
// ---------------------------------------------------------------------------

OnOffVector greedy_onoff(const ChannelSet& channels, const PhaseConfig& phases,
                         const Beamformers& beams, const SystemParams& params) {
  const int ris_count = params.num_ris;
  OnOffVector active = OnOffVector::all_on(ris_count);

  auto score = [&](const OnOffVector& x) -> double {
    const OperatingPoint point =
        evaluate_operating_point(params, channels, phases, x, beams);
    return rates_feasible(params, point) ? point.energy_efficiency : 0.0;
  };

  {
    const OperatingPoint point =
        evaluate_operating_point(params, channels, phases, active, beams);
    if (!rates_feasible(params, point)) {
      throw InfeasibleError("greedy_onoff: all-on start misses a rate demand");
    }
  }
  double incumbent = score(active);

  while (active.active_count() > 0) {
    int best_l = -1;
    double best_value = incumbent;
    int best_elements = -1;
    for (int l = 0; l < ris_count; ++l) {
      if (!active.x[l]) continue;
      OnOffVector candidate = active;
      candidate.x[l] = 0;
      const double value = score(candidate);
      const bool better = value > best_value;
      // Equal-value candidates: drop the RIS with the most elements.
      const bool tie_preferred =
          best_l >= 0 && value == best_value && params.elements_per_ris[l] > best_elements;
      if (better || tie_preferred) {
        best_l = l;
        best_value = value;
        best_elements = params.elements_per_ris[l];
      }
    }
    if (best_l < 0) break;
    active.x[best_l] = 0;
    incumbent = best_value;
  }
  return active;
}

Beamformers initial_beamformers(const ChannelSet& channels,
                                const PhaseConfig& phases,
                                const OnOffVector& onoff,
                                const SystemParams& params) {
  const int users = params.num_users;
  const int antennas = params.num_antennas;

  std::vector<Eigen::VectorXcd> ghat(users);
  for (int k = 0; k < users; ++k) {
    ghat[k] = effective_channel(channels, phases, onoff, k);
  }

  auto try_candidate = [&](const Beamformers& cand) -> bool {
    const OperatingPoint point =
        evaluate_operating_point(params, channels, phases, onoff, cand);
    return rates_feasible(params, point);
  };

  // Equal-power MRT first.
  Beamformers mrt;
  mrt.w.resize(users);
  bool mrt_ok = true;
  for (int k = 0; k < users; ++k) {
    const double norm = ghat[k].norm();
    if (!(norm > 0.0)) {
      mrt_ok = false;
      break;
    }
    mrt.w[k] = std::sqrt(params.p_max_w / users) / norm * ghat[k];
  }
  if (mrt_ok && try_candidate(mrt)) return mrt;

  // Zero-forcing repair when the BS has enough antennas.
  if (antennas >= users) {
    Eigen::MatrixXcd h(antennas, users);
    for (int k = 0; k < users; ++k) h.col(k) = ghat[k];
    const Eigen::MatrixXcd gram = h.adjoint() * h;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
    if (lu.isInvertible()) {
      const Eigen::MatrixXcd dirs = h * lu.inverse();
      Beamformers zf;
      zf.w.resize(users);
      double budget = 0.0;
      std::vector<double> p_min(users);
      std::vector<Eigen::VectorXcd> unit(users);
      bool ok = true;
      for (int k = 0; k < users; ++k) {
        unit[k] = dirs.col(k) / dirs.col(k).norm();
        const double gain = std::norm(ghat[k].dot(unit[k]));
        if (!(gain > 0.0)) {
          ok = false;
          break;
        }
        p_min[k] = rate_floor(params, k) * params.noise_w / gain * (1.0 + 1e-9);
        budget += p_min[k];
      }
      if (ok && budget <= params.p_max_w) {
        const double spare = (params.p_max_w - budget) / users;
        for (int k = 0; k < users; ++k) {
          zf.w[k] = std::sqrt(p_min[k] + spare) * unit[k];
        }
        if (try_candidate(zf)) return zf;
      }
    }
  }

  throw InfeasibleError("initial_beamformers: no feasible starting beamformers");
}

MultiUserResult optimize_multi_user(const ChannelSet& channels,
                                    const SystemParams& params,
                                    const numerics::SolverOptions& options,
                                    const MultiUserInit& init) {
  params.validate();
  constexpr int kMaxOuter = 20;
  constexpr int kMaxBeamSca = 15;

  PhaseConfig phases = init.phases ? *init.phases
                                   : PhaseConfig::zeros(params.elements_per_ris);
  OnOffVector onoff = init.onoff ? *init.onoff : OnOffVector::all_on(params.num_ris);
  Beamformers beams;
  if (init.beams) {
    beams = *init.beams;
    const OperatingPoint probe =
        evaluate_operating_point(params, channels, phases, onoff, beams);
    if (!rates_feasible(params, probe)) {
      beams = initial_beamformers(channels, phases, onoff, params);
    }
  } else {
    beams = initial_beamformers(channels, phases, onoff, params);
  }

  OperatingPoint point =
      evaluate_operating_point(params, channels, phases, onoff, beams);
  if (!rates_feasible(params, point)) {
    throw InfeasibleError("optimize_multi_user: no feasible starting point");
  }

  MultiUserResult result;
  double ee = point.energy_efficiency;
  double ee_prev = -std::numeric_limits<double>::infinity();

  for (int outer = 1; outer <= kMaxOuter; ++outer) {
    // Phase block.
    const auto phase_result =
        optimize_phases_mu(channels, beams, onoff, params, phases, options);
    if (phase_result.improved) {
      const OperatingPoint cand = evaluate_operating_point(
          params, channels, phase_result.phases, onoff, beams);
      if (rates_feasible(params, cand) && cand.energy_efficiency > ee) {
        phases = phase_result.phases;
        point = cand;
        ee = cand.energy_efficiency;
      }
    }

    // Beamforming block: SCA loop of Dinkelbach-solved subproblems.
    {
      BeamSubproblemState state;
      state.w = beams.w;
      double ee_beam = ee;
      for (int round = 0; round < kMaxBeamSca; ++round) {
        BeamSubproblemState next;
        try {
          next = solve_beam_subproblem(state, channels, phases, onoff, params, options);
        } catch (const InfeasibleError&) {
          break;
        }
        Beamformers cand_beams;
        cand_beams.w = next.w;
        const OperatingPoint cand = evaluate_operating_point(
            params, channels, phases, onoff, cand_beams);
        const double cand_ee = cand.energy_efficiency;
        const bool ok = rates_feasible(params, cand);
        const double change = std::abs(cand_ee - ee_beam);
        if (ok && cand_ee > ee) {
          beams = cand_beams;
          point = cand;
          ee = cand_ee;
        }
        state = next;
        if (change <= options.tolerance * std::max(ee_beam, 1e-300)) break;
        ee_beam = ok ? cand_ee : ee_beam;
      }
    }

    // On-off block (greedy restarts from all-on; keep the incumbent when the
    // restart is infeasible or not an improvement).
    try {
      const OnOffVector cand_onoff = greedy_onoff(channels, phases, beams, params);
      if (!(cand_onoff == onoff)) {
        const OperatingPoint cand =
            evaluate_operating_point(params, channels, phases, cand_onoff, beams);
        if (rates_feasible(params, cand) && cand.energy_efficiency > ee) {
          onoff = cand_onoff;
          point = cand;
          ee = cand.energy_efficiency;
        }
      }
    } catch (const InfeasibleError&) {
      // all-on restart infeasible with current beams; keep the incumbent
    }

    result.ee_trajectory.push_back(ee);
    result.outer_iterations = outer;
    if (std::abs(ee - ee_prev) <= options.tolerance * std::max(ee, 1e-300)) {
      result.converged = true;
      break;
    }
    ee_prev = ee;
  }

  result.point = point;
  return result;
}

}  // namespace risee::multi_user
