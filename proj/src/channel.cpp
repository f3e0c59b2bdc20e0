#include "lainsim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lain {

double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double watt_to_dbm(double watt) { return 10.0 * std::log10(watt / 1e-3); }

double los_probability(double horizontal_dist_m, double height_diff_m,
                       const ChannelParams& p) {
  double angle_deg;
  if (horizontal_dist_m <= 0.0) {
    angle_deg = 90.0;
  } else {
    angle_deg = (180.0 / std::numbers::pi) *
                std::atan(std::abs(height_diff_m) / horizontal_dist_m);
  }
  return 1.0 / (1.0 + p.rho1 * std::exp(-p.rho2 * (angle_deg - p.rho1)));
}

double path_loss_db(double dist_m, double los_prob, LinkKind kind,
                    const ChannelParams& p) {
  if (dist_m <= 0.0) throw DegenerateLink("path_loss_db: dist_m <= 0");
  const double free_space =
      20.0 * std::log10(4.0 * std::numbers::pi * p.carrier_frequency_hz * dist_m /
                        p.light_speed_mps);
  if (kind == LinkKind::AirAir) return free_space;
  return free_space +
         los_prob * (p.excess_los_db - p.excess_nlos_db) + p.excess_nlos_db;
}

std::vector<BandwidthShare> allocate_bandwidth(std::span<const QueuedSize> queued,
                                               double total_bw_hz) {
  std::vector<BandwidthShare> shares;
  if (queued.empty()) return shares;
  double total_bits = 0.0;
  for (const auto& q : queued) total_bits += q.size_bits;
  shares.reserve(queued.size());
  for (const auto& q : queued) {
    shares.push_back({q.demand_id, q.size_bits / total_bits * total_bw_hz});
  }
  return shares;
}

double shannon_rate_bps(double bw_hz, double path_loss_db, const ChannelParams& p) {
  if (bw_hz <= 0.0) return 0.0;
  const double rx_watt = dbm_to_watt(p.tx_power_dbm) * std::pow(10.0, -path_loss_db / 10.0);
  const double snr = rx_watt / dbm_to_watt(p.noise_power_dbm);
  return bw_hz * std::log2(1.0 + snr);
}

double hop_delay_s(double demand_bits, double rate_bps) {
  if (rate_bps <= 0.0) throw ZeroRate("hop_delay_s: rate_bps <= 0");
  return demand_bits / rate_bps;
}

double parallel_step_delay_s(std::span<const double> per_demand_delays_s) {
  double worst = 0.0;
  for (double d : per_demand_delays_s) worst = std::max(worst, d);
  return worst;
}

}  // namespace lain
