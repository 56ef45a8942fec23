#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace flowcast {

/// Minimal SHA-256 (FIPS 180-4). Used for content-addressed embedding cache
/// keys, input digests in run manifests, and the offline embedding hash.
class Sha256 {
public:
  Sha256();
  void update(const void* data, size_t len);
  void update(std::string_view s) { update(s.data(), s.size()); }
  // Finalizes; the object must not be updated afterwards.
  std::string hex_digest();
  void digest(uint8_t out[32]);

private:
  void process_block(const uint8_t* p);
  uint32_t h_[8];
  uint8_t buf_[64];
  size_t buf_len_ = 0;
  uint64_t total_len_ = 0;
  bool finalized_ = false;
};

std::string sha256_hex(std::string_view data);
// First 8 digest bytes, little-endian. Stable across platforms.
uint64_t sha256_prefix64(std::string_view data);
std::string sha256_file_hex(const std::string& path);  // throws if unreadable

}  // namespace flowcast
