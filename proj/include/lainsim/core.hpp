#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lain {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NodeNotActive : Error { using Error::Error; };
struct IllegalAction : Error { using Error::Error; };
struct DegenerateLink : Error { using Error::Error; };
struct ZeroRate : Error { using Error::Error; };
struct DegenerateDelay : Error { using Error::Error; };
struct DegenerateGeometry : Error { using Error::Error; };
struct ConservationViolation : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct DivergenceDetected : Error { using Error::Error; };
struct Infeasible : Error { using Error::Error; };
struct BadConfig : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  double horizontal_norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(Vec3 a, Vec3 b) { return (a - b).norm(); }

struct NodeId {
  std::uint32_t index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class NodeKind : std::uint8_t { SensorDevice, Uav, BaseStation };
enum class Cluster : std::uint8_t { Collection, Relay, Downlink, None };

struct Node {
  NodeId id;
  NodeKind kind = NodeKind::Uav;
  Cluster cluster = Cluster::None;
  Vec3 position;
  double capability = 0.0;  // abstract energy+compute score
  bool active = true;
};

inline double distance(const Node& a, const Node& b) {
  return distance(a.position, b.position);
}

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named sub-streams derived from one master seed keep the environment
// randomness (mobility, demand arrivals) decoupled from agent randomness
// (exploration, replay sampling), so paired-seed runs stay paired.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : stream) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  return splitmix64(master ^ h);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(master, stream) ^ splitmix64(index));
}

}  // namespace lain
