#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lainsim/traffic.hpp"

using namespace lain;

namespace {

struct Chain {
  Topology topo;
  NodeId sd, u1, u2, ud, bs;
};

Chain make_chain() {
  TopologyConfig cfg;
  Chain c{Topology(cfg), {}, {}, {}, {}, {}};
  c.sd = c.topo.add_node(NodeKind::SensorDevice, Cluster::None, {0, 0, 0}, 0.0);
  c.u1 = c.topo.add_node(NodeKind::Uav, Cluster::Collection, {60, 0, 210}, 1.0);
  c.u2 = c.topo.add_node(NodeKind::Uav, Cluster::Relay, {140, 0, 210}, 1.0);
  c.ud = c.topo.add_node(NodeKind::Uav, Cluster::Downlink, {220, 0, 210}, 1.0);
  c.bs = c.topo.add_node(NodeKind::BaseStation, Cluster::None, {400, 0, 0}, 0.0);
  return c;
}

}  // namespace

TEST_CASE("enqueue honors capacity and flags double-queuing") {
  Chain c = make_chain();
  TrafficState traffic(50);
  const DemandId d = traffic.add_demand(c.sd, c.bs, 500e3, 100.0, 0);
  CHECK(traffic.queue_of(c.sd).size() == 1);
  CHECK_THROWS_AS(traffic.enqueue(c.u1, d), Error);  // already queued at the SD

  TrafficState tiny(1);
  tiny.add_demand(c.sd, c.bs, 1e3, 100.0, 0);
  const DemandId dropped = tiny.add_demand(c.sd, c.bs, 1e3, 100.0, 0);
  CHECK(tiny.demand(dropped).state == DemandState::Dropped);
  CHECK(tiny.stats().dropped == 1);
  CHECK(tiny.stats().generated == 2);
}

TEST_CASE("forward_all moves a demand one hop and accumulates delay") {
  Chain c = make_chain();
  TrafficState traffic(50);
  const DemandId d = traffic.add_demand(c.u1, c.bs, 500e3, 100.0, 0);
  ChannelParams params;
  const auto rep = traffic.forward_all({{d, c.u2}}, c.topo, params, 0);
  REQUIRE(rep.hops.size() == 1);
  CHECK(rep.hops[0].from == c.u1);
  CHECK(rep.hops[0].to == c.u2);
  CHECK(traffic.demand(d).location == c.u2);
  CHECK(traffic.demand(d).hop_count == 1);
  CHECK(traffic.demand(d).accumulated_delay_s == rep.hops[0].delay_s);
  CHECK(traffic.demand(d).accumulated_delay_s > 0.0);
  CHECK(rep.node_step_delay_s.at(c.u1) == rep.hops[0].delay_s);
}

TEST_CASE("delivery at the destination BS ends the lifecycle with the summed delay") {
  Chain c = make_chain();
  TrafficState traffic(50);
  const DemandId d = traffic.add_demand(c.u2, c.bs, 500e3, 100.0, 0);
  ChannelParams params;
  traffic.forward_all({{d, c.ud}}, c.topo, params, 0);
  traffic.forward_all({{d, c.bs}}, c.topo, params, 1);
  const Demand& dem = traffic.demand(d);
  CHECK(dem.state == DemandState::Delivered);
  CHECK(dem.hop_count == 2);
  double total = 0.0;
  for (const auto& h : dem.path) total += h.delay_s;
  CHECK(dem.accumulated_delay_s == doctest::Approx(total).epsilon(1e-15));
  CHECK(traffic.stats().delivered == 1);
}

TEST_CASE("illegal decisions are caller bugs") {
  Chain c = make_chain();
  TrafficState traffic(50);
  const DemandId d = traffic.add_demand(c.u1, c.bs, 500e3, 100.0, 0);
  ChannelParams params;
  // u1 -> ud is out of the 100 m UAV range
  CHECK_THROWS_AS(traffic.forward_all({{d, c.ud}}, c.topo, params, 0), IllegalAction);
  // relay UAVs have no BS links
  const DemandId d2 = traffic.add_demand(c.u2, c.bs, 500e3, 100.0, 0);
  CHECK_THROWS_AS(traffic.forward_all({{d2, c.bs}}, c.topo, params, 0), IllegalAction);
  CHECK_THROWS_AS(traffic.forward_all({{9999, c.u2}}, c.topo, params, 0), IllegalAction);
}

TEST_CASE("capacity race at a shared next hop drops the higher demand id") {
  Chain c = make_chain();
  TrafficState traffic(50);
  traffic.set_capacity(c.u2, 1);
  const DemandId a = traffic.add_demand(c.u1, c.bs, 400e3, 100.0, 0);
  const DemandId b = traffic.add_demand(c.u1, c.bs, 600e3, 100.0, 0);
  ChannelParams params;
  const auto rep = traffic.forward_all({{a, c.u2}, {b, c.u2}}, c.topo, params, 0);
  CHECK(traffic.demand(a).state == DemandState::Queued);
  CHECK(traffic.demand(a).location == c.u2);
  CHECK(traffic.demand(b).state == DemandState::Dropped);
  CHECK(traffic.stats().dropped == 1);
  bool saw_drop = false;
  for (const auto& h : rep.hops)
    if (h.demand == b) saw_drop = h.dropped;
  CHECK(saw_drop);
}

TEST_CASE("bandwidth splits over co-queued demands and the step delay is the max") {
  Chain c = make_chain();
  TrafficState traffic(50);
  const DemandId a = traffic.add_demand(c.u1, c.bs, 400e3, 100.0, 0);
  const DemandId b = traffic.add_demand(c.u1, c.bs, 600e3, 100.0, 0);
  ChannelParams params;
  const auto rep = traffic.forward_all({{a, c.u2}, {b, c.u2}}, c.topo, params, 0);
  // proportional shares mean equal transfer times for both demands
  REQUIRE(rep.hops.size() == 2);
  CHECK(rep.hops[0].delay_s == doctest::Approx(rep.hops[1].delay_s).epsilon(1e-12));
  CHECK(rep.node_step_delay_s.at(c.u1) ==
        doctest::Approx(rep.hops[0].delay_s).epsilon(1e-12));
  // and the delay matches a single demand at the same total size
  TrafficState lone(50);
  const DemandId whole = lone.add_demand(c.u1, c.bs, 1000e3, 100.0, 0);
  const auto rep2 = lone.forward_all({{whole, c.u2}}, c.topo, params, 0);
  CHECK(rep.hops[0].delay_s == doctest::Approx(rep2.hops[0].delay_s).epsilon(1e-9));
}

TEST_CASE("demands expire when the accumulated delay crosses the tolerance") {
  Chain c = make_chain();
  TrafficState traffic(50);
  const DemandId d = traffic.add_demand(c.u1, c.bs, 500e3, 1e-9, 0);
  ChannelParams params;
  const auto rep = traffic.forward_all({{d, c.u2}}, c.topo, params, 0);
  CHECK(traffic.demand(d).state == DemandState::Expired);
  CHECK(rep.hops[0].expired);
  CHECK(traffic.stats().expired == 1);
  CHECK(traffic.queue_of(c.u2).empty());
}

TEST_CASE("conservation holds through generation, transport, and drops") {
  Chain c = make_chain();
  TrafficState traffic(2);
  CHECK(traffic.conservation_audit().stats.generated == 0);

  DemandGenConfig gen;
  gen.arrival_probability = 0.9;
  Rng rng(17);
  for (int step = 0; step < 10; ++step) traffic.generate(c.topo, gen, step, rng);
  const auto report = traffic.conservation_audit();
  CHECK(report.balanced);
  CHECK(report.stats.generated ==
        report.queued_now + report.stats.delivered + report.stats.dropped +
            report.stats.expired);
  CHECK(report.stats.generated > 0);
}

TEST_CASE("random multi-step run keeps the demand balance") {
  Chain c = make_chain();
  ChannelParams params;
  TrafficState traffic(3);
  DemandGenConfig gen;
  gen.arrival_probability = 0.6;
  gen.max_delay_s = 0.5;
  Rng rng(23);
  for (int step = 0; step < 500; ++step) {
    traffic.generate(c.topo, gen, step, rng);
    std::map<DemandId, NodeId> decisions;
    // fixed forwarding chain sd -> u1 -> u2 -> ud -> bs
    for (const auto& [id, d] : traffic.demands()) {
      if (d.state != DemandState::Queued) continue;
      if (d.location == c.sd) decisions[id] = c.u1;
      else if (d.location == c.u1) decisions[id] = c.u2;
      else if (d.location == c.u2) decisions[id] = c.ud;
      else if (d.location == c.ud) decisions[id] = c.bs;
    }
    traffic.forward_all(decisions, c.topo, params, step);
    const auto rep = traffic.conservation_audit();
    CHECK(rep.balanced);
  }
  CHECK(traffic.stats().delivered > 0);
}

TEST_CASE("redistribution rehomes stranded demands or drops them") {
  Chain c = make_chain();
  TrafficState traffic(50);
  const DemandId d = traffic.add_demand(c.u2, c.bs, 500e3, 100.0, 0);
  // u2's only in-range UAV peers are u1 and ud
  auto moved = traffic.redistribute_from(c.u2, c.topo, 3);
  REQUIRE(moved.size() == 1);
  CHECK_FALSE(moved[0].dropped);
  CHECK(traffic.demand(d).location == moved[0].to);
  CHECK(traffic.conservation_audit().balanced);

  // no neighbors in range: the demand is dropped with statistics
  TopologyConfig cfg;
  Topology lonely(cfg);
  const NodeId u = lonely.add_node(NodeKind::Uav, Cluster::Relay, {0, 0, 250}, 1.0);
  TrafficState t2(50);
  const DemandId d2 = t2.add_demand(u, c.bs, 500e3, 100.0, 0);
  auto moved2 = t2.redistribute_from(u, lonely, 1);
  REQUIRE(moved2.size() == 1);
  CHECK(moved2[0].dropped);
  CHECK(t2.demand(d2).state == DemandState::Dropped);
  CHECK(t2.conservation_audit().balanced);
}

TEST_CASE("ledger csv lists one row per demand") {
  Chain c = make_chain();
  TrafficState traffic(50);
  traffic.add_demand(c.sd, c.bs, 500e3, 100.0, 0);
  traffic.add_demand(c.sd, c.bs, 400e3, 100.0, 0);
  const std::string csv = traffic.ledger_csv();
  CHECK(csv.find("0,queued,0,4") != std::string::npos);
  CHECK(csv.find("1,queued,0,4") != std::string::npos);
}
