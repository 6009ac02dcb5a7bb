#include "risee/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "risee/rng.hpp"

namespace risee::oracles {

OnOffOracleResult exhaustive_onoff(
    const std::function<std::optional<double>(const OnOffVector&)>& evaluate,
    int ris_count) {
  if (ris_count < 1 || ris_count > 20) {
    throw std::invalid_argument("exhaustive_onoff: need 1 <= L <= 20");
  }

  OnOffOracleResult best;
  best.x = OnOffVector::all_off(ris_count);

  OnOffVector candidate;
  candidate.x.resize(ris_count);
  const std::uint32_t total = 1u << ris_count;
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    for (int l = 0; l < ris_count; ++l) {
      candidate.x[l] = (mask >> l) & 1u;
    }
    const auto value = evaluate(candidate);
    if (!value) continue;
    bool take = false;
    if (!best.any_feasible || *value > best.value) {
      take = true;
    } else if (*value == best.value) {
      const int cand_active = candidate.active_count();
      const int best_active = best.x.active_count();
      if (cand_active < best_active) {
        take = true;
      } else if (cand_active == best_active && candidate.x < best.x.x) {
        take = true;
      }
    }
    if (take) {
      best.any_feasible = true;
      best.value = *value;
      best.x = candidate;
    }
  }
  return best;
}

GridSearchResult grid_power(const std::function<double(double)>& ee_of_power,
                            double p_min, double p_max, int points) {
  if (points < 2) throw std::invalid_argument("grid_power: need at least 2 points");
  if (!(p_min <= p_max)) throw std::invalid_argument("grid_power: empty interval");

  GridSearchResult best{p_min, ee_of_power(p_min)};
  const double step = (p_max - p_min) / (points - 1);
  for (int i = 1; i < points; ++i) {
    const double p = (i == points - 1) ? p_max : p_min + step * i;
    const double value = ee_of_power(p);
    if (value > best.value) {
      best.p = p;
      best.value = value;
    }
  }
  return best;
}

PhaseSearchResult random_phase_search(
    const std::function<double(const Eigen::VectorXcd&)>& gain_of_phase,
    int dimension, int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("random_phase_search: samples >= 1");

  auto stream = rng::substream(seed, rng::StreamTag::kPhaseSearch);
  PhaseSearchResult best;
  best.gain = -std::numeric_limits<double>::infinity();
  Eigen::VectorXcd v(dimension);
  for (int s = 0; s < samples; ++s) {
    for (int q = 0; q < dimension; ++q) {
      v[q] = std::polar(1.0, stream.uniform(0.0, 2.0 * M_PI));
    }
    const double gain = gain_of_phase(v);
    if (gain > best.gain) {
      best.gain = gain;
      best.v = v;
    }
  }
  return best;
}

double kkt_residual(const numerics::ConvexSubproblem& problem,
                    const Eigen::VectorXd& point, double active_tolerance) {
  const int n = problem.dimension;

  // Collect gradients of near-active constraints (box bounds included).
  std::vector<Eigen::VectorXd> grads;
  std::vector<double> values;
  double worst_violation = 0.0;
  auto visit = [&](double value, Eigen::VectorXd grad) {
    worst_violation = std::max(worst_violation, value);
    if (value > -active_tolerance) {
      grads.push_back(std::move(grad));
      values.push_back(value);
    }
  };
  for (const auto& c : problem.constraints) {
    visit(c.value(point), c.gradient(point));
  }
  for (int j = 0; j < n; ++j) {
    if (problem.lower.size() == n && std::isfinite(problem.lower[j])) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      g[j] = -1.0;
      visit(problem.lower[j] - point[j], std::move(g));
    }
    if (problem.upper.size() == n && std::isfinite(problem.upper[j])) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      g[j] = 1.0;
      visit(point[j] - problem.upper[j], std::move(g));
    }
  }

  const Eigen::VectorXd fgrad = problem.objective.gradient(point);
  const double gscale = std::max(1.0, fgrad.norm());

  // Fit nonnegative multipliers for grad f = sum lambda_i grad c_i by
  // active-set least squares: solve, drop the most negative, repeat.
  std::vector<int> active(grads.size());
  for (size_t i = 0; i < grads.size(); ++i) active[i] = static_cast<int>(i);
  Eigen::VectorXd lambda;
  Eigen::VectorXd residual = fgrad;
  while (!active.empty()) {
    Eigen::MatrixXd a(n, active.size());
    for (size_t i = 0; i < active.size(); ++i) a.col(i) = grads[active[i]];
    lambda = a.colPivHouseholderQr().solve(fgrad);
    int drop = -1;
    double most_negative = -1e-12 * gscale;
    for (int i = 0; i < lambda.size(); ++i) {
      if (lambda[i] < most_negative) {
        most_negative = lambda[i];
        drop = i;
      }
    }
    if (drop < 0) {
      residual = fgrad - a * lambda;
      break;
    }
    active.erase(active.begin() + drop);
    residual = fgrad;
  }

  double complementarity = 0.0;
  const double fscale = std::max(1.0, std::abs(problem.objective.value(point)));
  for (size_t i = 0; i < active.size(); ++i) {
    complementarity =
        std::max(complementarity, std::abs(lambda[i] * values[active[i]]) / fscale);
  }

  return std::max({worst_violation, residual.norm() / gscale, complementarity});
}

}  // namespace risee::oracles
