#include "lainsim/crypto.hpp"

#include <openssl/evp.h>

namespace lain {

Digest Sha256Crypto::digest(std::span<const std::uint8_t> data) const {
  Digest out{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data.data(), data.size());
  EVP_DigestFinal_ex(ctx, out.data(), &len);
  EVP_MD_CTX_free(ctx);
  return out;
}

Digest Sha256Crypto::sign(const Bytes& key, std::span<const std::uint8_t> msg) const {
  Bytes buf;
  buf.reserve(key.size() + msg.size());
  buf.insert(buf.end(), key.begin(), key.end());
  buf.insert(buf.end(), msg.begin(), msg.end());
  return digest(buf);
}

namespace {
std::uint64_t fnv1a(std::span<const std::uint8_t> data, std::uint64_t h) {
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}
}  // namespace

Digest FastCrypto::digest(std::span<const std::uint8_t> data) const {
  Digest out{};
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int lane = 0; lane < 4; ++lane) {
    h = fnv1a(data, splitmix64(h + lane));
    for (int i = 0; i < 8; ++i) out[lane * 8 + i] = static_cast<std::uint8_t>(h >> (8 * i));
  }
  return out;
}

Digest FastCrypto::sign(const Bytes& key, std::span<const std::uint8_t> msg) const {
  Bytes buf;
  buf.reserve(key.size() + msg.size());
  buf.insert(buf.end(), key.begin(), key.end());
  buf.insert(buf.end(), msg.begin(), msg.end());
  return digest(buf);
}

Bytes random_key(Rng& rng, size_t len) {
  Bytes key(len);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& b : key) b = static_cast<std::uint8_t>(byte(rng));
  return key;
}

}  // namespace lain
