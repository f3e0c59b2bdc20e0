#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lainsim/channel.hpp"

using namespace lain;

namespace {
ChannelParams sim_params() { return ChannelParams{}; }  // defaults are the sim values

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}
}  // namespace

TEST_CASE("los probability at 90 degree elevation is ~1") {
  const auto p = sim_params();
  const double pr = los_probability(0.0, 100.0, p);
  CHECK(std::abs(pr - 1.0) < 1e-12);
}

TEST_CASE("los probability at zero elevation") {
  const auto p = sim_params();
  // frozen: 1 / (1 + 5.0188 * exp(0.3511 * 5.0188))
  const double pr = los_probability(100.0, 0.0, p);
  CHECK(close_rel(pr, 0.0330766528739465, 1e-9));
}

TEST_CASE("los probability with rho1 = 0 collapses to certainty") {
  auto p = sim_params();
  p.rho1 = 0.0;
  CHECK(los_probability(100.0, 0.0, p) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(los_probability(1.0, 100.0, p) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("los probability is monotone in elevation and bounded") {
  const auto p = sim_params();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> xy(0.01, 5000.0);
  std::uniform_real_distribution<double> h(0.0, 1000.0);
  double prev_angle = -1.0, prev_pr = -1.0;
  for (int i = 0; i < 100000; ++i) {
    const double hd = xy(rng);
    const double hh = h(rng);
    const double pr = los_probability(hd, hh, p);
    CHECK(pr >= 0.0);
    CHECK(pr <= 1.0);
    const double angle = std::atan2(hh, hd);
    if (prev_angle >= 0.0 && angle >= prev_angle) CHECK(pr >= prev_pr - 1e-15);
    prev_angle = angle;
    prev_pr = pr;
  }
  // explicit monotone sweep
  double last = -1.0;
  for (double deg = 0.0; deg <= 90.0; deg += 0.5) {
    const double rad = deg * 3.14159265358979323846 / 180.0;
    const double pr = los_probability(std::cos(rad), std::sin(rad), p);
    CHECK(pr >= last);
    last = pr;
  }
}

TEST_CASE("free-space path loss matches the frozen hand evaluation") {
  const auto p = sim_params();
  // 20*log10(4*pi*2.4e9*100/3e8) = 20*log10(4*pi*800)
  const double loss = path_loss_db(100.0, 1.0, LinkKind::AirAir, p);
  CHECK(close_rel(loss, 80.0459970202808, 1e-9));
}

TEST_CASE("ground-air loss collapses at Pr = 1 and Pr = 0") {
  const auto p = sim_params();
  const double fs = path_loss_db(100.0, 1.0, LinkKind::AirAir, p);
  CHECK(close_rel(path_loss_db(100.0, 1.0, LinkKind::GroundAir, p), fs + 0.1, 1e-12));
  CHECK(close_rel(path_loss_db(100.0, 0.0, LinkKind::GroundAir, p), fs + 21.0, 1e-12));
}

TEST_CASE("ground-air loss is bracketed by the LoS/NLoS extremes") {
  const auto p = sim_params();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(1.0, 2000.0);
  std::uniform_real_distribution<double> prob(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double d = dist(rng);
    const double pr = prob(rng);
    const double fs = path_loss_db(d, 1.0, LinkKind::AirAir, p);
    const double loss = path_loss_db(d, pr, LinkKind::GroundAir, p);
    CHECK(loss >= fs + p.excess_los_db - 1e-12);
    CHECK(loss <= fs + p.excess_nlos_db + 1e-12);
  }
}

TEST_CASE("path loss is strictly increasing in distance") {
  const auto p = sim_params();
  double prev = path_loss_db(1.0, 1.0, LinkKind::AirAir, p);
  for (double d = 2.0; d < 1000.0; d *= 1.5) {
    const double cur = path_loss_db(d, 1.0, LinkKind::AirAir, p);
    CHECK(cur > prev);
    prev = cur;
  }
  CHECK_THROWS_AS(path_loss_db(0.0, 1.0, LinkKind::AirAir, p), DegenerateLink);
}

TEST_CASE("bandwidth allocation is proportional and conserving") {
  const std::vector<QueuedSize> two_equal{{1, 1000.0}, {2, 1000.0}};
  auto shares = allocate_bandwidth(two_equal, 2e6);
  CHECK(shares[0].bandwidth_hz == doctest::Approx(1e6).epsilon(1e-12));
  CHECK(shares[1].bandwidth_hz == doctest::Approx(1e6).epsilon(1e-12));

  const std::vector<QueuedSize> sized{{1, 400e3}, {2, 600e3}};
  shares = allocate_bandwidth(sized, 2e6);
  CHECK(shares[0].bandwidth_hz == doctest::Approx(0.8e6).epsilon(1e-12));
  CHECK(shares[1].bandwidth_hz == doctest::Approx(1.2e6).epsilon(1e-12));

  const std::vector<QueuedSize> single{{9, 123.0}};
  shares = allocate_bandwidth(single, 2e6);
  CHECK(shares[0].bandwidth_hz == doctest::Approx(2e6).epsilon(1e-12));

  CHECK(allocate_bandwidth({}, 2e6).empty());

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> size(1e3, 1e6);
  std::uniform_int_distribution<int> count(1, 40);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<QueuedSize> q;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) q.push_back({static_cast<std::uint64_t>(i), size(rng)});
    const auto out = allocate_bandwidth(q, 2e6);
    double total = 0.0;
    for (const auto& s : out) total += s.bandwidth_hz;
    CHECK(std::abs(total - 2e6) <= 1e-9 * 2e6);
    // size ordering preserved
    for (size_t i = 0; i < q.size(); ++i)
      for (size_t j = 0; j < q.size(); ++j)
        if (q[i].size_bits < q[j].size_bits)
          CHECK(out[i].bandwidth_hz <= out[j].bandwidth_hz + 1e-12);
  }
}

TEST_CASE("shannon rate: unit SNR, zero bandwidth, frozen evaluation") {
  auto p = sim_params();
  // SNR = 1 exactly: rx power equals noise power => L = Ptx - sigma2
  const double loss_for_unit_snr = p.tx_power_dbm - p.noise_power_dbm;
  CHECK(shannon_rate_bps(1e6, loss_for_unit_snr, p) ==
        doctest::Approx(1e6).epsilon(1e-12));
  CHECK(shannon_rate_bps(0.0, 80.0, p) == 0.0);

  // frozen: bw * log2(1 + 10^((40 - 80.0459970202808 + 110)/10))
  const double rate = shannon_rate_bps(1e6, 80.0459970202808, p);
  CHECK(close_rel(rate, 23238216.9306220, 1e-9));
}

TEST_CASE("shannon rate is monotone in bandwidth and path loss") {
  const auto p = sim_params();
  double prev = 0.0;
  for (double bw = 1e5; bw <= 4e6; bw += 1e5) {
    const double r = shannon_rate_bps(bw, 90.0, p);
    CHECK(r > prev);
    prev = r;
  }
  prev = shannon_rate_bps(1e6, 60.0, p);
  for (double loss = 65.0; loss < 140.0; loss += 5.0) {
    const double r = shannon_rate_bps(1e6, loss, p);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("hop delay and the per-node parallel max") {
  CHECK(hop_delay_s(1e6, 1e6) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hop_delay_s(500e3, 2e6) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(hop_delay_s(1e6, 0.0), ZeroRate);

  const double r = 1e6;
  const std::vector<double> delays{400e3 / r, 600e3 / r};
  CHECK(parallel_step_delay_s(delays) == doctest::Approx(600e3 / r).epsilon(1e-12));
}

TEST_CASE("dbm conversions round-trip") {
  CHECK(dbm_to_watt(30.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(watt_to_dbm(dbm_to_watt(-110.0)) == doctest::Approx(-110.0).epsilon(1e-12));
}
