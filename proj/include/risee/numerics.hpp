#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace risee::numerics {

/// Principal-branch Lambert-W: the w >= -1 solution of w*exp(w) = x.
/// Halley iteration from a log-based initial guess, bisection fallback if an
/// iterate leaves the branch. Residual |w e^w - x| <= 1e-12 * max(1, |x|).
/// Throws std::domain_error for x < -1/e.
double lambert_w0(double x);

/// dBm -> Watts: 10^((x - 30) / 10).
double dbm_to_watts(double dbm);

/// Watts -> dBm; throws std::domain_error for w <= 0.
double watts_to_dbm(double watts);

struct SolverOptions {
  double tolerance = 1e-6;        // relative objective-change threshold
  int max_iterations = 400;
  double step_size_initial = 0.5; // phi in the subgradient schedule phi/sqrt(t)
  double kkt_tolerance = 1e-7;    // max allowed KKT residual
};

struct SubgradientResult {
  Eigen::VectorXd point;  // best iterate seen (by objective value)
  double value = 0.0;
  int iterations = 0;
  bool converged = false;  // objective stabilized before max_iterations
};

/// Projected subgradient descent (minimization) with the diminishing schedule
/// phi_t = step_size_initial / sqrt(t). Stops once the best objective value
/// has improved by less than tolerance * max(1, |best|) over a trailing
/// window, or at max_iterations (converged=false; caller decides).
SubgradientResult projected_subgradient(
    const Eigen::VectorXd& initial,
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& subgradient,
    const std::function<Eigen::VectorXd(Eigen::VectorXd)>& project,
    const SolverOptions& options);

/// A small dense convex program: maximize a concave objective subject to
/// convex inequality constraints (<= 0) and box bounds. Gradients are
/// required; Hessian callbacks are optional (finite differences of the
/// gradient are used when absent).
struct ConvexSubproblem {
  using ValueFn = std::function<double(const Eigen::VectorXd&)>;
  using GradFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using HessFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  struct Functional {
    ValueFn value;
    GradFn gradient;
    HessFn hessian;  // optional
  };

  int dimension = 0;
  Functional objective;                 // concave; maximized
  std::vector<Functional> constraints;  // convex; feasible iff value <= 0
  Eigen::VectorXd lower;                // box bounds; +-inf entries allowed
  Eigen::VectorXd upper;

  static constexpr double kInf = std::numeric_limits<double>::infinity();

  static ConvexSubproblem unbounded(int dim) {
    ConvexSubproblem p;
    p.dimension = dim;
    p.lower = Eigen::VectorXd::Constant(dim, -kInf);
    p.upper = Eigen::VectorXd::Constant(dim, kInf);
    return p;
  }
};

struct ConvexResult {
  Eigen::VectorXd point;
  double objective = 0.0;
  Eigen::VectorXd multipliers;  // one per constraint, then per finite bound
  int newton_steps = 0;
  bool converged = false;
};

/// Log-barrier interior method with damped Newton inner steps. The start must
/// be strictly feasible (inside the box, all constraints < 0) or
/// InfeasibleError is thrown. On converged=true the returned point satisfies
/// the KKT contract: constraints <= kkt_tolerance, Lagrangian gradient norm
/// <= kkt_tolerance * max(1, |grad f|), complementary slackness residual
/// <= kkt_tolerance.
ConvexResult solve_convex(const ConvexSubproblem& problem,
                          const Eigen::VectorXd& start,
                          const SolverOptions& options);

}  // namespace risee::numerics
