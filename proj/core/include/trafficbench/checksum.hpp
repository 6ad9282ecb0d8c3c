#pragma once

#include <cstdint>
#include <span>

namespace trafficbench {

/// Standard internet checksum: one's-complement of the one's-complement sum
/// of big-endian 16-bit words. An odd trailing byte is padded with zero.
std::uint16_t internet_checksum(std::span<const std::uint8_t> data);

/// Incremental form for sums that span a pseudo-header plus segment bytes.
/// Chunks may have odd length; a pending odd byte is completed by the first
/// byte of the next chunk.
class ChecksumAccumulator {
 public:
  void add(std::span<const std::uint8_t> data);
  void add_u16(std::uint16_t v) { sum_ += v; }
  void add_u32(std::uint32_t v) {
    sum_ += v >> 16;
    sum_ += v & 0xFFFF;
  }

  /// Folded, complemented result.
  std::uint16_t finish() const;

 private:
  std::uint64_t sum_ = 0;
  bool odd_ = false;
};

}  // namespace trafficbench
