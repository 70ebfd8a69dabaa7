#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace nuggetkit {

/// Lowercase hex SHA-256 of the bytes of `data`.
std::string sha256_hex(std::string_view data);

/// Incremental fingerprint over a sequence of labelled fields. Each field is
/// length-prefixed so ("ab","c") and ("a","bc") never collide.
class Fingerprint {
 public:
  Fingerprint& add(std::string_view key, std::string_view value);
  Fingerprint& add(std::string_view key, double value);
  Fingerprint& add(std::string_view key, std::int64_t value);
  std::string hex() const;

 private:
  std::string buffer_;
};

/// SplitMix64 step; used to decorrelate user seeds before seeding engines.
std::uint64_t splitmix64(std::uint64_t x);

/// First 8 bytes of SHA-256 as an integer; stable across platforms.
std::uint64_t stable_hash64(std::string_view data);

}  // namespace nuggetkit
