#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lainsim/core.hpp"

namespace lain {

enum class LinkKind : std::uint8_t { GroundAir, AirAir };

struct ChannelParams {
  double carrier_frequency_hz = 2.4e9;
  double light_speed_mps = 3.0e8;
  double rho1 = 5.0188;
  double rho2 = 0.3511;
  double excess_los_db = 0.1;
  double excess_nlos_db = 21.0;
  double noise_power_dbm = -110.0;
  double tx_power_dbm = 40.0;
};

// Per-pair link figures for one time step. rate_bps/delay_s are filled in
// per demand once bandwidth shares are known.
struct LinkStats {
  double distance_m = 0.0;
  double path_loss_db = 0.0;
  double los_probability = 1.0;
  double rate_bps = 0.0;
  double delay_s = 0.0;
};

double dbm_to_watt(double dbm);
double watt_to_dbm(double watt);

// Probability of a line-of-sight link given the horizontal distance and
// height difference between the ground node and the UAV. A zero horizontal
// distance is treated as a 90 degree elevation angle.
double los_probability(double horizontal_dist_m, double height_diff_m,
                       const ChannelParams& p);

// Free-space term plus the LoS-probability-weighted excess loss. The excess
// term applies to ground-air links only.
double path_loss_db(double dist_m, double los_prob, LinkKind kind,
                    const ChannelParams& p);

struct BandwidthShare {
  std::uint64_t demand_id = 0;
  double bandwidth_hz = 0.0;
};

struct QueuedSize {
  std::uint64_t demand_id = 0;
  double size_bits = 0.0;
};

// Splits the node bandwidth across queued demands proportionally to their
// sizes, so co-queued demands finish their transmissions together.
std::vector<BandwidthShare> allocate_bandwidth(std::span<const QueuedSize> queued,
                                               double total_bw_hz);

double shannon_rate_bps(double bw_hz, double path_loss_db, const ChannelParams& p);

// Transmission delay of one demand over one link.
double hop_delay_s(double demand_bits, double rate_bps);

// Max over per-demand delays forwarded by one node in one step; the node
// transmits in parallel so this is the step's wall-clock cost at that node.
double parallel_step_delay_s(std::span<const double> per_demand_delays_s);

}  // namespace lain
