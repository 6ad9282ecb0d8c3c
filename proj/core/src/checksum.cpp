#include "trafficbench/checksum.hpp"

namespace trafficbench {

void ChecksumAccumulator::add(std::span<const std::uint8_t> data) {
  std::size_t i = 0;
  const std::size_t n = data.size();
  if (odd_ && i < n) {
    sum_ += data[i];  // completes the high byte added by the previous chunk
    odd_ = false;
    ++i;
  }
  for (; i + 1 < n; i += 2) {
    sum_ += static_cast<std::uint16_t>((data[i] << 8) | data[i + 1]);
  }
  if (i < n) {
    sum_ += static_cast<std::uint16_t>(data[i] << 8);
    odd_ = true;
  }
}

std::uint16_t ChecksumAccumulator::finish() const {
  std::uint64_t s = sum_;
  while (s >> 16) {
    s = (s & 0xFFFF) + (s >> 16);
  }
  return static_cast<std::uint16_t>(~s & 0xFFFF);
}

std::uint16_t internet_checksum(std::span<const std::uint8_t> data) {
  ChecksumAccumulator acc;
  acc.add(data);
  return acc.finish();
}

}  // namespace trafficbench
