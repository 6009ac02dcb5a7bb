#include "risee/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "risee/rng.hpp"

namespace risee {

int SystemParams::total_elements() const {
  int q = 0;
  for (int n : elements_per_ris) q += n;
  return q;
}

SystemParams SystemParams::defaults() { return defaults_with(1, 8, 8, 4); }

SystemParams SystemParams::defaults_with(int users, int antennas, int ris_count,
                                         int elements_each) {
  SystemParams p;
  p.num_users = users;
  p.num_antennas = antennas;
  p.num_ris = ris_count;
  p.elements_per_ris.assign(ris_count, elements_each);
  p.p_user_w.assign(users, 0.01);       // 10 dBm each
  p.min_rates_bps.assign(users, 1e6);   // 1 Mbps each
  return p;
}

void SystemParams::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SystemParams: " + msg); };
  if (!(bandwidth_hz > 0)) fail("bandwidth must be positive");
  if (!(noise_w > 0)) fail("noise power must be positive");
  if (!(p_max_w > 0)) fail("p_max must be positive");
  if (!(amplifier_inefficiency >= 1.0)) fail("mu must be >= 1");
  if (!(p_bs_w > 0)) fail("BS circuit power must be positive");
  if (!(p_ris_element_w > 0)) fail("RIS element power must be positive");
  if (!(relay_power_w > 0)) fail("relay power must be positive");
  if (!(relay_antenna_circuit_w > 0)) fail("relay antenna power must be positive");
  if (num_antennas < 1) fail("need at least one antenna");
  if (num_ris < 1) fail("need at least one RIS");
  if (num_users < 1) fail("need at least one user");
  if (!(penalty_c > 0)) fail("penalty constant must be positive");
  if (static_cast<int>(elements_per_ris.size()) != num_ris) fail("elements_per_ris length != L");
  for (int n : elements_per_ris) {
    if (n < 1) fail("every RIS needs at least one element");
  }
  if (static_cast<int>(p_user_w.size()) != num_users) fail("p_user_w length != K");
  for (double p : p_user_w) {
    if (!(p > 0)) fail("user circuit power must be positive");
  }
  if (static_cast<int>(min_rates_bps.size()) != num_users) fail("min_rates_bps length != K");
  for (double r : min_rates_bps) {
    if (r < 0) fail("rate demands must be nonnegative");
  }
}

PhaseConfig::PhaseConfig(Eigen::VectorXd theta, std::vector<int> elements_per_ris)
    : theta_(std::move(theta)), sizes_(std::move(elements_per_ris)) {
  int q = 0;
  for (int n : sizes_) q += n;
  if (q != theta_.size()) {
    throw std::invalid_argument("PhaseConfig: theta length does not match element counts");
  }
  constexpr double kTwoPi = 2.0 * M_PI;
  for (int i = 0; i < theta_.size(); ++i) {
    double t = std::fmod(theta_[i], kTwoPi);
    if (t < 0) t += kTwoPi;
    theta_[i] = t;
  }
}

PhaseConfig PhaseConfig::zeros(const std::vector<int>& elements_per_ris) {
  int q = 0;
  for (int n : elements_per_ris) q += n;
  return PhaseConfig(Eigen::VectorXd::Zero(q), elements_per_ris);
}

PhaseConfig PhaseConfig::from_conj_stack(const Eigen::VectorXcd& v,
                                         const std::vector<int>& elements_per_ris) {
  Eigen::VectorXd theta(v.size());
  for (int i = 0; i < v.size(); ++i) theta[i] = -std::arg(v[i]);
  return PhaseConfig(std::move(theta), elements_per_ris);
}

PhaseConfig PhaseConfig::from_coefficients(const Eigen::VectorXcd& s,
                                           const std::vector<int>& elements_per_ris) {
  Eigen::VectorXd theta(s.size());
  for (int i = 0; i < s.size(); ++i) theta[i] = std::arg(s[i]);
  return PhaseConfig(std::move(theta), elements_per_ris);
}

Eigen::VectorXcd PhaseConfig::coefficients() const {
  Eigen::VectorXcd s(theta_.size());
  for (int i = 0; i < theta_.size(); ++i) {
    s[i] = std::polar(1.0, theta_[i]);
  }
  return s;
}

Eigen::VectorXcd PhaseConfig::conj_stack() const { return coefficients().conjugate(); }

Eigen::VectorXcd PhaseConfig::ris_coefficients(int l) const {
  int offset = 0;
  for (int i = 0; i < l; ++i) offset += sizes_[i];
  Eigen::VectorXcd s(sizes_[l]);
  for (int i = 0; i < sizes_[l]; ++i) s[i] = std::polar(1.0, theta_[offset + i]);
  return s;
}

Topology generate_topology(const SystemParams& params, double region_side_m,
                           double ris_radius_m, std::uint64_t seed) {
  if (!(region_side_m > 0) || !(ris_radius_m > 0)) {
    throw std::invalid_argument("generate_topology: region and radius must be positive");
  }
  Topology topo;
  topo.bs = {0.0, 0.0};

  auto stream = rng::substream(seed, rng::StreamTag::kUserPositions);
  const double half = region_side_m / 2.0;
  topo.users.resize(params.num_users);
  for (auto& u : topo.users) {
    u.x = stream.uniform(-half, half);
    u.y = stream.uniform(-half, half);
  }

  topo.ris.resize(params.num_ris);
  for (int l = 0; l < params.num_ris; ++l) {
    const double angle = 2.0 * M_PI * static_cast<double>(l + 1) / params.num_ris;
    topo.ris[l] = {std::cos(angle) * ris_radius_m, std::sin(angle) * ris_radius_m};
  }
  return topo;
}

double path_loss(double distance_m) {
  if (!(distance_m > 0)) {
    throw std::domain_error("path_loss: distance must be positive");
  }
  return std::pow(10.0, -3.53) / std::pow(distance_m, 3.76);
}

ChannelSet generate_channels(const Topology& topology, const SystemParams& params,
                             std::uint64_t seed) {
  const int users = params.num_users;
  const int ris_count = params.num_ris;
  const int antennas = params.num_antennas;

  ChannelSet ch;
  ch.g.resize(users);
  for (int k = 0; k < users; ++k) {
    auto stream = rng::substream(seed, rng::StreamTag::kDirectChannel,
                                 {static_cast<std::uint64_t>(k)});
    const double amp = std::sqrt(path_loss(distance(topology.bs, topology.users[k])));
    ch.g[k].resize(antennas);
    for (int m = 0; m < antennas; ++m) ch.g[k][m] = amp * stream.cnormal();
  }

  ch.bs_ris.resize(ris_count);
  for (int l = 0; l < ris_count; ++l) {
    auto stream = rng::substream(seed, rng::StreamTag::kBsRisChannel,
                                 {static_cast<std::uint64_t>(l)});
    const double amp = std::sqrt(path_loss(distance(topology.bs, topology.ris[l])));
    const int n = params.elements_per_ris[l];
    ch.bs_ris[l].resize(n, antennas);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < antennas; ++c) ch.bs_ris[l](r, c) = amp * stream.cnormal();
    }
  }

  ch.h.assign(users, std::vector<Eigen::VectorXcd>(ris_count));
  for (int k = 0; k < users; ++k) {
    for (int l = 0; l < ris_count; ++l) {
      auto stream = rng::substream(seed, rng::StreamTag::kRisUserChannel,
                                   {static_cast<std::uint64_t>(k),
                                    static_cast<std::uint64_t>(l)});
      const double amp = std::sqrt(path_loss(distance(topology.ris[l], topology.users[k])));
      const int n = params.elements_per_ris[l];
      ch.h[k][l].resize(n);
      for (int r = 0; r < n; ++r) ch.h[k][l][r] = amp * stream.cnormal();
    }
  }
  return ch;
}

Eigen::VectorXcd effective_channel(const ChannelSet& channels,
                                   const PhaseConfig& phases,
                                   const OnOffVector& onoff, int user) {
  Eigen::VectorXcd ghat = channels.g[user];
  const int ris_count = static_cast<int>(channels.bs_ris.size());
  for (int l = 0; l < ris_count; ++l) {
    if (!onoff.x[l]) continue;
    const Eigen::VectorXcd s = phases.ris_coefficients(l);
    // G_l^H Theta_l^H h_kl with Theta_l = diag(s).
    ghat += channels.bs_ris[l].adjoint() * (s.conjugate().cwiseProduct(channels.h[user][l]));
  }
  return ghat;
}

Eigen::MatrixXcd build_cascade_matrix(const ChannelSet& channels,
                                      const OnOffVector& onoff, int user) {
  int q = 0;
  for (const auto& m : channels.bs_ris) q += static_cast<int>(m.rows());
  const int antennas = static_cast<int>(channels.g[user].size());

  Eigen::MatrixXcd cascade = Eigen::MatrixXcd::Zero(q, antennas);
  int offset = 0;
  const int ris_count = static_cast<int>(channels.bs_ris.size());
  for (int l = 0; l < ris_count; ++l) {
    const int n = static_cast<int>(channels.bs_ris[l].rows());
    if (onoff.x[l]) {
      cascade.middleRows(offset, n) =
          channels.h[user][l].conjugate().asDiagonal() * channels.bs_ris[l];
    }
    offset += n;
  }
  return cascade;
}

double sinr(const SystemParams& params, const ChannelSet& channels,
            const PhaseConfig& phases, const OnOffVector& onoff,
            const Beamformers& beams, int user) {
  const Eigen::VectorXcd ghat = effective_channel(channels, phases, onoff, user);
  const int users = static_cast<int>(beams.w.size());
  // Eigen's dot conjugates the left argument, so ghat.dot(w) = ghat^H w.
  double interference = 0.0;
  for (int i = 0; i < users; ++i) {
    if (i == user) continue;
    interference += std::norm(ghat.dot(beams.w[i]));
  }
  const double signal = std::norm(ghat.dot(beams.w[user]));
  return signal / (interference + params.noise_w);
}

double total_power(const SystemParams& params, const OnOffVector& onoff,
                   const Beamformers& beams) {
  double p = params.amplifier_inefficiency * beams.transmit_power() + params.p_bs_w;
  for (double pk : params.p_user_w) p += pk;
  for (int l = 0; l < params.num_ris; ++l) {
    if (onoff.x[l]) p += params.elements_per_ris[l] * params.p_ris_element_w;
  }
  return p;
}

OperatingPoint evaluate_operating_point(const SystemParams& params,
                                        const ChannelSet& channels,
                                        PhaseConfig phases, OnOffVector onoff,
                                        Beamformers beams) {
  OperatingPoint point;
  point.phases = std::move(phases);
  point.onoff = std::move(onoff);
  point.beams = std::move(beams);

  const int users = params.num_users;
  point.sinr.resize(users);
  point.rates_bps.resize(users);
  point.sum_rate_bps = 0.0;
  for (int k = 0; k < users; ++k) {
    point.sinr[k] = sinr(params, channels, point.phases, point.onoff, point.beams, k);
    point.rates_bps[k] = params.bandwidth_hz * std::log2(1.0 + point.sinr[k]);
    point.sum_rate_bps += point.rates_bps[k];
  }
  point.total_power_w = total_power(params, point.onoff, point.beams);
  point.energy_efficiency = point.sum_rate_bps / point.total_power_w;
  return point;
}

std::string Violation::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::MinRate:
      os << "user " << index << " misses its rate demand by " << amount << " bit/s";
      break;
    case Kind::PowerBudget:
      os << "transmit power exceeds the budget by " << amount << " W";
      break;
    case Kind::UnitModulus:
      os << "element " << index << " reflection modulus off by " << amount;
      break;
    case Kind::Binary:
      os << "on-off entry " << index << " is not binary";
      break;
  }
  return os.str();
}

std::vector<Violation> check_feasibility(const SystemParams& params,
                                         const OperatingPoint& point) {
  std::vector<Violation> violations;
  for (int k = 0; k < params.num_users; ++k) {
    const double demand = params.min_rates_bps[k];
    const double floor = demand - 1e-6 * demand;
    if (point.rates_bps[k] < floor) {
      violations.push_back({Violation::Kind::MinRate, k, demand - point.rates_bps[k]});
    }
  }
  const double tx = point.beams.transmit_power();
  if (tx > params.p_max_w + 1e-9) {
    violations.push_back({Violation::Kind::PowerBudget, -1, tx - params.p_max_w});
  }
  const Eigen::VectorXcd s = point.phases.coefficients();
  for (int q = 0; q < s.size(); ++q) {
    const double off = std::abs(std::abs(s[q]) - 1.0);
    if (off > 1e-12) {
      violations.push_back({Violation::Kind::UnitModulus, q, off});
    }
  }
  for (int l = 0; l < static_cast<int>(point.onoff.x.size()); ++l) {
    if (point.onoff.x[l] != 0 && point.onoff.x[l] != 1) {
      violations.push_back({Violation::Kind::Binary, l, 0.0});
    }
  }
  return violations;
}

}  // namespace risee
