#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>

#include "risee/model.hpp"
#include "risee/numerics.hpp"

// Independent brute-force references. These share no optimization logic with
// the solvers they audit; they are shipped so the CLI can print solver vs
// oracle gaps.
namespace risee::oracles {

struct OnOffOracleResult {
  OnOffVector x;
  double value = 0.0;
  bool any_feasible = false;
};

/// Enumerates all 2^L binary vectors (L <= 20) and returns the feasible
/// argmax; the evaluator returns nullopt for infeasible candidates. Ties go
/// to fewer active RISs, then to the lexicographically smallest vector.
OnOffOracleResult exhaustive_onoff(
    const std::function<std::optional<double>(const OnOffVector&)>& evaluate,
    int ris_count);

struct GridSearchResult {
  double p = 0.0;
  double value = 0.0;
};

/// Best of a uniform grid over [p_min, p_max] including both endpoints.
GridSearchResult grid_power(const std::function<double(double)>& ee_of_power,
                            double p_min, double p_max, int points);

struct PhaseSearchResult {
  Eigen::VectorXcd v;
  double gain = 0.0;
};

/// Best of `samples` uniform random unit-modulus vectors.
PhaseSearchResult random_phase_search(
    const std::function<double(const Eigen::VectorXcd&)>& gain_of_phase,
    int dimension, int samples, std::uint64_t seed);

/// KKT audit of a candidate point: max of constraint violation, projected
/// Lagrangian gradient norm (multipliers fitted by nonnegative least squares
/// over near-active constraints) and complementary-slackness residual.
double kkt_residual(const numerics::ConvexSubproblem& problem,
                    const Eigen::VectorXd& point,
                    double active_tolerance = 1e-6);

}  // namespace risee::oracles
