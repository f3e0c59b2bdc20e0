#include "lainsim/topology.hpp"

#include <algorithm>
#include <cstdio>

namespace lain {

namespace {
std::string format_row(int step, const Node& n) {
  char buf[160];
  const char* kind = n.kind == NodeKind::SensorDevice ? "sd"
                     : n.kind == NodeKind::Uav        ? "uav"
                                                      : "bs";
  std::snprintf(buf, sizeof(buf), "%d,%u,%s,%.17g,%.17g,%.17g,%d\n", step,
                n.id.index, kind, n.position.x, n.position.y, n.position.z,
                n.active ? 1 : 0);
  return buf;
}
}  // namespace

NodeId Topology::add_node(NodeKind kind, Cluster cluster, Vec3 position,
                          double capability) {
  if ((kind == NodeKind::Uav) != (cluster != Cluster::None))
    throw BadConfig("cluster must be set exactly for UAV nodes");
  if (kind != NodeKind::Uav && position.z != 0.0)
    throw BadConfig("ground nodes require z = 0");
  NodeId id{static_cast<std::uint32_t>(nodes_.size())};
  nodes_.push_back(Node{id, kind, cluster, position, capability, true});
  return id;
}

const Node& Topology::node(NodeId id) const {
  if (id.index >= nodes_.size()) throw BadConfig("unknown node id");
  return nodes_[id.index];
}

Node& Topology::node_mut(NodeId id) {
  if (id.index >= nodes_.size()) throw BadConfig("unknown node id");
  return nodes_[id.index];
}

void Topology::set_active(NodeId id, bool active) { node_mut(id).active = active; }

void Topology::set_d_max_override(NodeId uav, double d_max_m) {
  d_max_override_[uav] = d_max_m;
}

double Topology::d_max_of(NodeId uav) const {
  auto it = d_max_override_.find(uav);
  return it == d_max_override_.end() ? cfg_.d_max_uav_m : it->second;
}

std::vector<NodeId> Topology::neighbors(NodeId u) const {
  const Node& self = node(u);
  if (self.kind != NodeKind::Uav || !self.active)
    throw NodeNotActive("neighbors: node is not an active UAV");
  std::vector<NodeId> out;
  const double d_max = d_max_of(u);
  for (const Node& other : nodes_) {
    if (other.kind != NodeKind::Uav || !other.active || other.id == u) continue;
    const double d = distance(self, other);
    if (d <= d_max && d >= cfg_.d_min_m) out.push_back(other.id);
  }
  return out;
}

std::vector<NodeId> Topology::reachable_bs(NodeId u) const {
  const Node& self = node(u);
  if (self.kind != NodeKind::Uav || !self.active)
    throw NodeNotActive("reachable_bs: node is not an active UAV");
  std::vector<NodeId> out;
  if (self.cluster != Cluster::Downlink) return out;
  for (const Node& other : nodes_) {
    if (other.kind != NodeKind::BaseStation) continue;
    if (distance(self, other) <= cfg_.d_max_ground_m) out.push_back(other.id);
  }
  return out;
}

std::vector<NodeId> Topology::uplink_candidates(NodeId sd) const {
  const Node& self = node(sd);
  if (self.kind != NodeKind::SensorDevice)
    throw BadConfig("uplink_candidates: node is not a sensor device");
  std::vector<NodeId> out;
  for (const Node& other : nodes_) {
    if (other.kind != NodeKind::Uav || !other.active) continue;
    if (other.cluster != Cluster::Collection) continue;
    if (distance(self, other) <= cfg_.d_max_ground_m) out.push_back(other.id);
  }
  return out;
}

bool Topology::comm_link(NodeId n, NodeId m) const {
  const Node& a = node(n);
  const Node& b = node(m);
  if (!a.active || !b.active) return false;
  if (a.kind == NodeKind::SensorDevice && b.kind == NodeKind::Uav) {
    return b.cluster == Cluster::Collection &&
           distance(a, b) <= cfg_.d_max_ground_m;
  }
  if (a.kind == NodeKind::Uav && b.kind == NodeKind::Uav) {
    if (n == m) return false;
    const double d = distance(a, b);
    return d >= cfg_.d_min_m && d <= d_max_of(n);
  }
  if (a.kind == NodeKind::Uav && b.kind == NodeKind::BaseStation) {
    return a.cluster == Cluster::Downlink &&
           distance(a, b) <= cfg_.d_max_ground_m;
  }
  return false;
}

std::optional<NodeId> Topology::cluster_head(Cluster c) const {
  std::optional<NodeId> best;
  for (const Node& n : nodes_) {
    if (n.kind != NodeKind::Uav || !n.active || n.cluster != c) continue;
    if (!best) {
      best = n.id;
      continue;
    }
    const Node& b = node(*best);
    if (n.capability > b.capability ||
        (n.capability == b.capability && n.id < b.id)) {
      best = n.id;
    }
  }
  return best;
}

std::vector<NodeId> Topology::uavs_of_cluster(Cluster c) const {
  std::vector<NodeId> out;
  for (const Node& n : nodes_)
    if (n.kind == NodeKind::Uav && n.active && n.cluster == c) out.push_back(n.id);
  return out;
}

std::vector<NodeId> Topology::active_uavs() const {
  std::vector<NodeId> out;
  for (const Node& n : nodes_)
    if (n.kind == NodeKind::Uav && n.active) out.push_back(n.id);
  return out;
}

std::vector<NodeId> Topology::base_stations() const {
  std::vector<NodeId> out;
  for (const Node& n : nodes_)
    if (n.kind == NodeKind::BaseStation) out.push_back(n.id);
  return out;
}

std::vector<NodeId> Topology::sensor_devices() const {
  std::vector<NodeId> out;
  for (const Node& n : nodes_)
    if (n.kind == NodeKind::SensorDevice) out.push_back(n.id);
  return out;
}

bool Topology::uav_move_ok(NodeId id, Vec3 candidate) const {
  for (const Node& other : nodes_) {
    if (other.kind != NodeKind::Uav || !other.active || other.id == id) continue;
    if (distance(candidate, other.position) < cfg_.d_min_m) return false;
  }
  return true;
}

void Topology::step_mobility(Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double v = cfg_.max_step_displacement_m;
  for (Node& n : nodes_) {
    if (n.kind != NodeKind::Uav || !n.active) continue;
    if (v <= 0.0) continue;
    bool moved = false;
    for (int attempt = 0; attempt < cfg_.mobility_retries; ++attempt) {
      // Uniform direction in the unit ball, rejection-sampled.
      Vec3 dir{unit(rng), unit(rng), unit(rng)};
      if (dir.norm() > 1.0) {
        --attempt;
        continue;
      }
      Vec3 cand = n.position + v * dir;
      cand.x = std::clamp(cand.x, 0.0, cfg_.area_x_m);
      cand.y = std::clamp(cand.y, 0.0, cfg_.area_y_m);
      cand.z = std::clamp(cand.z, cfg_.altitude_min_m, cfg_.altitude_max_m);
      if (uav_move_ok(n.id, cand)) {
        n.position = cand;
        moved = true;
        break;
      }
    }
    (void)moved;  // staying put is the fallback
  }
  ++time_step_;
}

void Topology::assert_invariants() const {
  for (const Node& n : nodes_) {
    if (n.kind == NodeKind::Uav) {
      if (n.cluster == Cluster::None) throw BadConfig("UAV without cluster");
      if (n.position.z < cfg_.altitude_min_m - 1e-9 ||
          n.position.z > cfg_.altitude_max_m + 1e-9)
        throw BadConfig("UAV outside altitude band");
    } else {
      if (n.cluster != Cluster::None) throw BadConfig("ground node with cluster");
      if (n.position.z != 0.0) throw BadConfig("ground node off the ground");
    }
  }
  for (size_t i = 0; i < nodes_.size(); ++i) {
    for (size_t j = i + 1; j < nodes_.size(); ++j) {
      const Node& a = nodes_[i];
      const Node& b = nodes_[j];
      if (a.kind != NodeKind::Uav || b.kind != NodeKind::Uav) continue;
      if (!a.active || !b.active) continue;
      if (distance(a, b) < cfg_.d_min_m - 1e-9)
        throw BadConfig("minimum UAV separation violated");
    }
  }
}

std::string Topology::snapshot_csv_header() {
  return "step,node,kind,x,y,z,active\n";
}

std::string Topology::snapshot_csv() const {
  std::string out;
  for (const Node& n : nodes_) out += format_row(time_step_, n);
  return out;
}

}  // namespace lain
