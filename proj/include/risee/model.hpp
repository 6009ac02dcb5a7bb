#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace risee {

/// All scalar constants of a scenario. Powers are linear Watts internally;
/// dB/dBm only ever appear at the I/O boundary.
struct SystemParams {
  double bandwidth_hz = 1e6;             // B
  double noise_w = 3.9810717055349695e-14;  // sigma^2 (-104 dBm)
  double p_max_w = 100.0;                // P_max (50 dBm)
  double amplifier_inefficiency = 1.25;  // mu = 1/nu
  double p_bs_w = 7.943282347242816;     // P_B (39 dBm)
  std::vector<double> p_user_w;          // P_k, length K
  double p_ris_element_w = 0.01;         // P_R (10 dBm)
  int num_antennas = 8;                  // M
  int num_ris = 8;                       // L
  std::vector<int> elements_per_ris;     // N_l, length L
  int num_users = 1;                     // K
  std::vector<double> min_rates_bps;     // R_k, length K
  double penalty_c = 1e3;                // C
  double relay_power_w = 1.0;            // P_T (30 dBm)
  double relay_antenna_circuit_w = 0.01; // P_A (10 dBm)

  /// Q = sum of N_l; derived, never stored.
  int total_elements() const;

  /// Defaults of the standard scenario (M=8, L=8, N=4, K=1, R=1 Mbps).
  static SystemParams defaults();

  /// Same defaults resized to the given counts.
  static SystemParams defaults_with(int users, int antennas, int ris_count,
                                    int elements_each);

  void validate() const;  // throws std::invalid_argument on broken invariants
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct Topology {
  Vec2 bs;
  std::vector<Vec2> users;
  std::vector<Vec2> ris;
};

/// One Monte-Carlo draw of the three channel families.
struct ChannelSet {
  std::vector<Eigen::VectorXcd> g;               // K vectors of length M
  std::vector<Eigen::MatrixXcd> bs_ris;          // L matrices, N_l x M (G_l)
  std::vector<std::vector<Eigen::VectorXcd>> h;  // [k][l], length N_l
};

/// Phase shifts theta_ln in [0, 2pi) for all Q elements, with the derived
/// unit-modulus views used by the solvers.
class PhaseConfig {
 public:
  PhaseConfig() = default;
  PhaseConfig(Eigen::VectorXd theta, std::vector<int> elements_per_ris);

  static PhaseConfig zeros(const std::vector<int>& elements_per_ris);
  /// Rebuild from the conjugate stack v (v_q = e^{-j theta_q}).
  static PhaseConfig from_conj_stack(const Eigen::VectorXcd& v,
                                     const std::vector<int>& elements_per_ris);
  /// Rebuild from reflection coefficients s (s_q = e^{+j theta_q}); s is
  /// projected to unit modulus first.
  static PhaseConfig from_coefficients(const Eigen::VectorXcd& s,
                                       const std::vector<int>& elements_per_ris);

  const Eigen::VectorXd& theta() const { return theta_; }
  const std::vector<int>& elements_per_ris() const { return sizes_; }
  int total_elements() const { return static_cast<int>(theta_.size()); }

  /// s with s_q = e^{+j theta_q}.
  Eigen::VectorXcd coefficients() const;
  /// v = [theta_1^*; ...; theta_L^*], i.e. v_q = e^{-j theta_q}.
  Eigen::VectorXcd conj_stack() const;
  /// Unit-modulus vector of RIS l (0-based), s_l.
  Eigen::VectorXcd ris_coefficients(int l) const;

 private:
  Eigen::VectorXd theta_;
  std::vector<int> sizes_;
};

struct OnOffVector {
  std::vector<std::uint8_t> x;  // each entry exactly 0 or 1

  static OnOffVector all_on(int ris_count) {
    return OnOffVector{std::vector<std::uint8_t>(ris_count, 1)};
  }
  static OnOffVector all_off(int ris_count) {
    return OnOffVector{std::vector<std::uint8_t>(ris_count, 0)};
  }
  int active_count() const {
    int n = 0;
    for (auto v : x) n += v;
    return n;
  }
  bool operator==(const OnOffVector& o) const { return x == o.x; }
};

struct Beamformers {
  std::vector<Eigen::VectorXcd> w;  // K vectors of length M

  double transmit_power() const {
    double p = 0.0;
    for (const auto& wk : w) p += wk.squaredNorm();
    return p;
  }
};

/// A full candidate solution with its achieved metrics.
struct OperatingPoint {
  PhaseConfig phases;
  OnOffVector onoff;
  Beamformers beams;
  Eigen::VectorXd sinr;       // gamma_k
  Eigen::VectorXd rates_bps;  // B log2(1 + gamma_k)
  double sum_rate_bps = 0.0;
  double total_power_w = 0.0;
  double energy_efficiency = 0.0;  // bit/Joule
};

/// BS at the region center, users iid uniform over the square, RIS l at
/// (cos(2 l pi / L), sin(2 l pi / L)) * ris_radius_m, l = 1..L.
Topology generate_topology(const SystemParams& params, double region_side_m,
                           double ris_radius_m, std::uint64_t seed);

/// Large-scale gain 10^(-3.53) / d^3.76; throws std::domain_error for d <= 0.
double path_loss(double distance_m);

/// Each entry is sqrt(path_loss(d)) * CN(0,1), deterministic per seed.
ChannelSet generate_channels(const Topology& topology, const SystemParams& params,
                             std::uint64_t seed);

/// ghat_k = g_k + sum_l x_l G_l^H Theta_l^H h_kl  (column form of Eq-7 type).
Eigen::VectorXcd effective_channel(const ChannelSet& channels,
                                   const PhaseConfig& phases,
                                   const OnOffVector& onoff, int user);

/// U_k = [x_1 U_k1; ...; x_L U_kL], U_kl = diag(h_kl^H) G_l; rows of off RISs
/// are zero. Satisfies h_kl^H Theta_l G_l = theta_l^T U_kl row for row.
Eigen::MatrixXcd build_cascade_matrix(const ChannelSet& channels,
                                      const OnOffVector& onoff, int user);

double sinr(const SystemParams& params, const ChannelSet& channels,
            const PhaseConfig& phases, const OnOffVector& onoff,
            const Beamformers& beams, int user);

/// mu * sum_k w_k^H w_k + P_B + sum_k P_k + sum_l x_l N_l P_R.
double total_power(const SystemParams& params, const OnOffVector& onoff,
                   const Beamformers& beams);

/// Fills sinr, rates, sum-rate, total power and energy efficiency for the
/// given (phases, on-off, beams) triple.
OperatingPoint evaluate_operating_point(const SystemParams& params,
                                        const ChannelSet& channels,
                                        PhaseConfig phases, OnOffVector onoff,
                                        Beamformers beams);

struct Violation {
  enum class Kind { MinRate, PowerBudget, UnitModulus, Binary };
  Kind kind;
  int index = -1;      // user / RIS / element index when applicable
  double amount = 0.0; // size of the violation
  std::string describe() const;
};

/// Empty iff rates_k >= R_k (1 - 1e-6), the power budget holds, every derived
/// reflection coefficient is unit-modulus and x is binary.
std::vector<Violation> check_feasibility(const SystemParams& params,
                                         const OperatingPoint& point);

}  // namespace risee
