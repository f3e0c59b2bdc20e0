#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "lainsim/core.hpp"

namespace lain {

using Digest = std::array<std::uint8_t, 32>;
using Bytes = std::vector<std::uint8_t>;

// Identities are modeled with a symmetric primitive: the registered key is
// also the signing key. Good enough for tamper evidence; real asymmetric
// schemes can be slotted in behind this interface.
class CryptoSuite {
 public:
  virtual ~CryptoSuite() = default;
  virtual Digest digest(std::span<const std::uint8_t> data) const = 0;
  virtual Digest sign(const Bytes& key, std::span<const std::uint8_t> msg) const = 0;
  bool verify(const Bytes& key, std::span<const std::uint8_t> msg,
              const Digest& sig) const {
    return sign(key, msg) == sig;
  }
};

// SHA-256 via OpenSSL; the collision-resistant option for integrity tests.
class Sha256Crypto final : public CryptoSuite {
 public:
  Digest digest(std::span<const std::uint8_t> data) const override;
  Digest sign(const Bytes& key, std::span<const std::uint8_t> msg) const override;
};

// FNV-1a folded into 32 bytes; a cheap stand-in for hot test loops.
class FastCrypto final : public CryptoSuite {
 public:
  Digest digest(std::span<const std::uint8_t> data) const override;
  Digest sign(const Bytes& key, std::span<const std::uint8_t> msg) const override;
};

Bytes random_key(Rng& rng, size_t len = 32);

}  // namespace lain
