#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace trafficbench {

struct RawPacket {
  std::uint64_t uid = 0;
  std::uint32_t ts_sec = 0;
  std::uint32_t ts_frac = 0;  // nanoseconds, always < 1e9 regardless of file precision
  std::uint32_t orig_len = 0;
  std::uint32_t link_type = 1;  // pcap network field (1 = ethernet, 101 = raw ip)
  bool truncated = false;       // snaplen cut the capture short
  std::string trace_id;
  std::vector<std::uint8_t> bytes;
};

enum class PcapPrecision { micro, nano };

struct PcapReadResult {
  std::vector<RawPacket> packets;
  PcapPrecision precision = PcapPrecision::micro;
  std::uint32_t link_type = 1;
  bool dropped_tail = false;  // a truncated trailing record was discarded
};

/// Reads a classic pcap stream (both endiannesses, microsecond or nanosecond
/// magic). Packets are yielded in file order with uids assigned sequentially
/// from first_uid. A malformed global header throws ValidationError; a
/// truncated final record is dropped with a warning.
PcapReadResult read_pcap(std::istream& in, const std::string& trace_id,
                         std::uint64_t first_uid = 0);

PcapReadResult read_pcap_file(const std::filesystem::path& path,
                              std::uint64_t first_uid = 0);

/// Writes little-endian classic pcap at the requested precision. Microsecond
/// output truncates sub-microsecond detail.
void write_pcap(std::ostream& out, const std::vector<RawPacket>& packets,
                PcapPrecision precision = PcapPrecision::micro,
                std::uint32_t link_type = 1);

void write_pcap_file(const std::filesystem::path& path,
                     const std::vector<RawPacket>& packets,
                     PcapPrecision precision = PcapPrecision::micro,
                     std::uint32_t link_type = 1);

/// Reads several capture files into one packet list with globally sequential
/// uids; trace_id is each file's stem.
std::vector<RawPacket> read_pcap_files(const std::vector<std::filesystem::path>& paths);

}  // namespace trafficbench
