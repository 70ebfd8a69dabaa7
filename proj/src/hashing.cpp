#include "nuggetkit/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <stdexcept>

namespace nuggetkit {

namespace {

std::array<unsigned char, 32> sha256_raw(std::string_view data) {
  std::array<unsigned char, 32> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != md.size())
    throw std::runtime_error("sha256 digest failed");
  return md;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto md = sha256_raw(data);
  std::string out;
  out.reserve(64);
  for (unsigned char b : md) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

Fingerprint& Fingerprint::add(std::string_view key, std::string_view value) {
  buffer_ += std::to_string(key.size());
  buffer_ += ':';
  buffer_ += key;
  buffer_ += std::to_string(value.size());
  buffer_ += ':';
  buffer_ += value;
  return *this;
}

Fingerprint& Fingerprint::add(std::string_view key, double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return add(key, std::string_view(buf, res.ptr - buf));
}

Fingerprint& Fingerprint::add(std::string_view key, std::int64_t value) {
  return add(key, std::string_view(std::to_string(value)));
}

std::string Fingerprint::hex() const { return sha256_hex(buffer_); }

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stable_hash64(std::string_view data) {
  auto md = sha256_raw(data);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | md[i];
  return v;
}

}  // namespace nuggetkit
