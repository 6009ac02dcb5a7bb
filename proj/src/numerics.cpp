#include "risee/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "risee/errors.hpp"

namespace risee::numerics {

namespace {

constexpr double kBranchPoint = -0.36787944117144233;  // -1/e

double lambert_initial_guess(double x) {
  if (x > 1.0) {
    // Asymptotic guess W ~ log(x) - log(log(x)) for large arguments.
    const double lx = std::log(x);
    const double llx = std::log(lx);
    return lx - llx + llx / lx;
  }
  if (x < -0.32) {
    // Series around the branch point in sqrt(2(1 + e x)).
    const double p = std::sqrt(2.0 * (1.0 + M_E * x));
    return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  }
  // W(x) = x - x^2 + 1.5 x^3 - ... works well on the remaining interval.
  return x * (1.0 + x * (-1.0 + x * (1.5 - 8.0 / 3.0 * x)));
}

double lambert_residual(double w, double x) { return w * std::exp(w) - x; }

// Bisection fallback on w e^w = x; the principal branch is increasing.
double lambert_bisect(double x) {
  double lo = -1.0;
  double hi = (x > 0.0) ? std::max(1.0, std::log(x) + 1.0) : 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (lambert_residual(mid, x) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double lambert_w0(double x) {
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x < kBranchPoint) {
    throw std::domain_error("lambert_w0: argument below -1/e");
  }
  if (x == 0.0) return 0.0;
  if (x <= kBranchPoint * (1.0 - 1e-15)) return -1.0;

  double w = lambert_initial_guess(x);
  if (w < -1.0) w = -1.0 + 1e-12;

  const double target = 1e-13 * std::max(1.0, std::abs(x));
  for (int iter = 0; iter < 40; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    if (std::abs(f) <= target) return w;
    const double fp = ew * (w + 1.0);
    const double fpp = ew * (w + 2.0);
    const double denom = fp - 0.5 * f * fpp / fp;
    double next = w - f / denom;
    if (!std::isfinite(next) || next < -1.0) {
      return lambert_bisect(x);
    }
    if (next == w) return w;
    w = next;
  }
  if (std::abs(lambert_residual(w, x)) <= 1e-12 * std::max(1.0, std::abs(x))) {
    return w;
  }
  return lambert_bisect(x);
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) {
  if (!(watts > 0.0)) {
    throw std::domain_error("watts_to_dbm: power must be positive");
  }
  return 10.0 * std::log10(watts) + 30.0;
}

SubgradientResult projected_subgradient(
    const Eigen::VectorXd& initial,
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& subgradient,
    const std::function<Eigen::VectorXd(Eigen::VectorXd)>& project,
    const SolverOptions& options) {
  constexpr int kWindow = 30;

  SubgradientResult result;
  Eigen::VectorXd x = project(initial);
  result.point = x;
  result.value = objective(x);

  std::deque<double> window;
  window.push_back(result.value);

  for (int t = 1; t <= options.max_iterations; ++t) {
    const double phi = options.step_size_initial / std::sqrt(static_cast<double>(t));
    x = project(x - phi * subgradient(x));
    const double value = objective(x);
    result.iterations = t;
    if (value < result.value) {
      result.value = value;
      result.point = x;
    }
    window.push_back(result.value);
    if (static_cast<int>(window.size()) > kWindow) {
      const double before = window.front();
      window.pop_front();
      const double improvement = before - result.value;
      if (improvement <= options.tolerance * std::max(1.0, std::abs(result.value))) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

namespace {

// Internal view of one barrier constraint (user constraints plus finite box
// bounds folded in).
struct BarrierConstraint {
  ConvexSubproblem::ValueFn value;
  ConvexSubproblem::GradFn gradient;
  ConvexSubproblem::HessFn hessian;  // may be empty
  bool linear = false;               // box bounds: Hessian is zero
};

Eigen::MatrixXd fd_hessian(const ConvexSubproblem::GradFn& grad,
                           const Eigen::VectorXd& x) {
  const int n = static_cast<int>(x.size());
  const Eigen::VectorXd g0 = grad(x);
  Eigen::MatrixXd h(n, n);
  Eigen::VectorXd xp = x;
  for (int j = 0; j < n; ++j) {
    const double step = std::sqrt(std::numeric_limits<double>::epsilon()) *
                        std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + step;
    h.col(j) = (grad(xp) - g0) / step;
    xp[j] = x[j];
  }
  return 0.5 * (h + h.transpose());
}

}  // namespace

ConvexResult solve_convex(const ConvexSubproblem& problem,
                          const Eigen::VectorXd& start,
                          const SolverOptions& options) {
  const int n = problem.dimension;
  if (start.size() != n) {
    throw std::invalid_argument("solve_convex: start dimension mismatch");
  }

  std::vector<BarrierConstraint> cons;
  cons.reserve(problem.constraints.size() + 2 * n);
  for (const auto& c : problem.constraints) {
    cons.push_back({c.value, c.gradient, c.hessian, false});
  }
  // Finite box bounds become linear constraints so one barrier handles all.
  for (int j = 0; j < n; ++j) {
    if (problem.lower.size() == n && std::isfinite(problem.lower[j])) {
      const double b = problem.lower[j];
      cons.push_back({[j, b](const Eigen::VectorXd& x) { return b - x[j]; },
                      [j, n](const Eigen::VectorXd&) {
                        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
                        g[j] = -1.0;
                        return g;
                      },
                      nullptr, true});
    }
    if (problem.upper.size() == n && std::isfinite(problem.upper[j])) {
      const double b = problem.upper[j];
      cons.push_back({[j, b](const Eigen::VectorXd& x) { return x[j] - b; },
                      [j, n](const Eigen::VectorXd&) {
                        Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
                        g[j] = 1.0;
                        return g;
                      },
                      nullptr, true});
    }
  }
  const int m = static_cast<int>(cons.size());

  std::vector<double> cvals(m);
  auto eval_constraints = [&](const Eigen::VectorXd& x) {
    for (int i = 0; i < m; ++i) cvals[i] = cons[i].value(x);
  };
  auto strictly_feasible = [&](const Eigen::VectorXd& x) {
    for (int i = 0; i < m; ++i) {
      if (!(cons[i].value(x) < 0.0)) return false;
    }
    return true;
  };

  if (!strictly_feasible(start)) {
    throw InfeasibleError("solve_convex: start is not strictly feasible");
  }

  // Objective scaling keeps the Newton system well conditioned when callers
  // pass objectives that are not O(1).
  const double fscale = std::max(1.0, problem.objective.gradient(start).norm());

  Eigen::VectorXd x = start;
  const double kkt_tol = options.kkt_tolerance;
  double t = 1.0;
  const double t_final = std::max(
      2.0, 4.0 * std::max(static_cast<double>(std::max(m, 1)), fscale) / kkt_tol);
  int newton_steps = 0;
  const int max_newton_per_stage = 80;

  // Work with G_t = -f/fscale - (1/t) sum log(-c_i): values stay O(1) at
  // every stage, so the line search is not drowned by rounding noise.
  auto barrier_value = [&](const Eigen::VectorXd& p, double tt, bool& ok) {
    ok = true;
    double v = -problem.objective.value(p) / fscale;
    for (int i = 0; i < m; ++i) {
      const double ci = cons[i].value(p);
      if (!(ci < 0.0)) {
        ok = false;
        return 0.0;
      }
      v -= std::log(-ci) / tt;
    }
    return v;
  };

  while (true) {
    for (int inner = 0; inner < max_newton_per_stage; ++inner) {
      eval_constraints(x);
      const Eigen::VectorXd fgrad = problem.objective.gradient(x) / fscale;
      Eigen::VectorXd grad = -fgrad;
      Eigen::MatrixXd hess;
      if (problem.objective.hessian) {
        hess = -problem.objective.hessian(x) / fscale;
      } else {
        hess = -fd_hessian(problem.objective.gradient, x) / fscale;
      }
      for (int i = 0; i < m; ++i) {
        const double ci = cvals[i];
        const Eigen::VectorXd gi = cons[i].gradient(x);
        grad += gi / (-ci * t);
        hess += gi * gi.transpose() / (ci * ci * t);
        if (!cons[i].linear) {
          if (cons[i].hessian) {
            hess += cons[i].hessian(x) / (-ci * t);
          } else {
            hess += fd_hessian(cons[i].gradient, x) / (-ci * t);
          }
        }
      }

      // grad(G_t) is the Lagrangian gradient in f-scaled units.
      const double stage_tol =
          (t >= t_final)
              ? 0.25 * kkt_tol * std::max(1.0, fgrad.norm() * fscale) / fscale
              : 0.25 * kkt_tol;
      if (grad.norm() <= stage_tol) break;

      Eigen::VectorXd dir;
      double ridge = 0.0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd h = hess;
        if (ridge > 0.0) h.diagonal().array() += ridge;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        if (ldlt.info() == Eigen::Success) {
          dir = ldlt.solve(-grad);
          if (dir.allFinite() && grad.dot(dir) < 0.0) break;
        }
        dir.resize(0);
        ridge = (ridge == 0.0) ? 1e-8 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff())
                               : ridge * 100.0;
      }
      if (dir.size() == 0) dir = -grad;

      bool ok = false;
      const double f0 = barrier_value(x, t, ok);
      const double slope = grad.dot(dir);
      const double noise = 1e-14 * std::max(1.0, std::abs(f0));
      double alpha = 1.0;
      bool stepped = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::VectorXd cand = x + alpha * dir;
        bool cand_ok = false;
        const double fc = barrier_value(cand, t, cand_ok);
        if (cand_ok && fc <= f0 + 1e-4 * alpha * slope + noise) {
          x = cand;
          stepped = true;
          break;
        }
        alpha *= 0.5;
      }
      ++newton_steps;
      if (!stepped) break;  // stalled; move to the next barrier stage
    }
    if (t >= t_final) break;
    t = std::min(t * 20.0, t_final);
  }

  ConvexResult result;
  result.point = x;
  result.objective = problem.objective.value(x);
  result.newton_steps = newton_steps;
  result.multipliers.resize(m);
  eval_constraints(x);
  for (int i = 0; i < m; ++i) {
    result.multipliers[i] = fscale / (t * (-cvals[i]));
  }

  // Verify the KKT contract on the way out.
  const Eigen::VectorXd fgrad = problem.objective.gradient(x);
  Eigen::VectorXd lag = fgrad;
  double comp = 0.0;
  double feas = 0.0;
  for (int i = 0; i < m; ++i) {
    lag -= result.multipliers[i] * cons[i].gradient(x);
    comp = std::max(comp, std::abs(result.multipliers[i] * cvals[i]));
    feas = std::max(feas, cvals[i]);
  }
  const double gscale = std::max(1.0, fgrad.norm());
  result.converged = feas <= kkt_tol && lag.norm() <= kkt_tol * gscale &&
                     comp / std::max(1.0, std::abs(result.objective)) <= kkt_tol;
  return result;
}

}  // namespace risee::numerics
