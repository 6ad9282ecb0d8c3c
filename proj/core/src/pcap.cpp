#include "trafficbench/pcap.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>

#include "trafficbench/bytes.hpp"
#include "trafficbench/errors.hpp"
#include "trafficbench/log.hpp"

namespace trafficbench {

namespace {

constexpr std::uint32_t kMagicMicro = 0xA1B2C3D4;
constexpr std::uint32_t kMagicNano = 0xA1B23C4D;
constexpr std::uint32_t kMaxSanePacket = 256 * 1024 * 1024;

std::uint32_t read_u32(const std::uint8_t* p, bool swapped) {
  return swapped ? le32(p) : be32(p);
}

}  // namespace

PcapReadResult read_pcap(std::istream& in, const std::string& trace_id,
                         std::uint64_t first_uid) {
  std::array<std::uint8_t, 24> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size())) {
    throw ValidationError("pcap '" + trace_id + "': global header shorter than 24 bytes");
  }

  // The magic is stored in the writer's byte order; detect both.
  const std::uint32_t magic_be = be32(header.data());
  const std::uint32_t magic_le = le32(header.data());
  bool swapped;  // true when the file is little-endian
  PcapPrecision precision;
  if (magic_be == kMagicMicro) {
    swapped = false;
    precision = PcapPrecision::micro;
  } else if (magic_le == kMagicMicro) {
    swapped = true;
    precision = PcapPrecision::micro;
  } else if (magic_be == kMagicNano) {
    swapped = false;
    precision = PcapPrecision::nano;
  } else if (magic_le == kMagicNano) {
    swapped = true;
    precision = PcapPrecision::nano;
  } else {
    throw ValidationError("pcap '" + trace_id + "': unrecognized magic, not a classic pcap");
  }

  PcapReadResult result;
  result.precision = precision;
  result.link_type = read_u32(header.data() + 20, swapped);

  std::uint64_t uid = first_uid;
  std::array<std::uint8_t, 16> rec{};
  while (true) {
    in.read(reinterpret_cast<char*>(rec.data()), rec.size());
    const auto got = in.gcount();
    if (got == 0) break;  // clean end of file
    if (got != static_cast<std::streamsize>(rec.size())) {
      log_warn("pcap '" + trace_id + "': truncated record header at end of file, dropped");
      result.dropped_tail = true;
      break;
    }
    RawPacket pkt;
    pkt.ts_sec = read_u32(rec.data(), swapped);
    const std::uint32_t frac = read_u32(rec.data() + 4, swapped);
    const std::uint32_t incl_len = read_u32(rec.data() + 8, swapped);
    pkt.orig_len = read_u32(rec.data() + 12, swapped);
    if (incl_len > kMaxSanePacket) {
      log_warn("pcap '" + trace_id + "': record claims " + std::to_string(incl_len) +
               " bytes, stream unusable past this point");
      result.dropped_tail = true;
      break;
    }
    pkt.bytes.resize(incl_len);
    in.read(reinterpret_cast<char*>(pkt.bytes.data()), incl_len);
    if (in.gcount() != static_cast<std::streamsize>(incl_len)) {
      log_warn("pcap '" + trace_id + "': truncated final record, dropped");
      result.dropped_tail = true;
      break;
    }
    if (incl_len == 0) {
      log_warn("pcap '" + trace_id + "': zero-length record skipped");
      continue;
    }
    pkt.ts_frac = precision == PcapPrecision::micro ? frac * 1000u : frac;
    if (pkt.ts_frac >= 1000000000u) {
      log_warn("pcap '" + trace_id + "': sub-second fraction out of range, wrapped");
      pkt.ts_frac %= 1000000000u;
    }
    pkt.truncated = incl_len < pkt.orig_len;
    pkt.link_type = result.link_type;
    pkt.trace_id = trace_id;
    pkt.uid = uid++;
    result.packets.push_back(std::move(pkt));
  }
  return result;
}

PcapReadResult read_pcap_file(const std::filesystem::path& path, std::uint64_t first_uid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open pcap file: " + path.string());
  }
  return read_pcap(in, path.stem().string(), first_uid);
}

void write_pcap(std::ostream& out, const std::vector<RawPacket>& packets,
                PcapPrecision precision, std::uint32_t link_type) {
  std::array<std::uint8_t, 24> header{};
  put_le32(header.data(), precision == PcapPrecision::micro ? kMagicMicro : kMagicNano);
  put_le16(header.data() + 4, 2);  // version 2.4
  put_le16(header.data() + 6, 4);
  put_le32(header.data() + 8, 0);
  put_le32(header.data() + 12, 0);
  put_le32(header.data() + 16, 262144);
  put_le32(header.data() + 20, link_type);
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  std::array<std::uint8_t, 16> rec{};
  for (const auto& pkt : packets) {
    const std::uint32_t incl = static_cast<std::uint32_t>(pkt.bytes.size());
    put_le32(rec.data(), pkt.ts_sec);
    put_le32(rec.data() + 4,
             precision == PcapPrecision::micro ? pkt.ts_frac / 1000u : pkt.ts_frac);
    put_le32(rec.data() + 8, incl);
    put_le32(rec.data() + 12, pkt.orig_len >= incl ? pkt.orig_len : incl);
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
    out.write(reinterpret_cast<const char*>(pkt.bytes.data()),
              static_cast<std::streamsize>(pkt.bytes.size()));
  }
}

void write_pcap_file(const std::filesystem::path& path,
                     const std::vector<RawPacket>& packets, PcapPrecision precision,
                     std::uint32_t link_type) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw ValidationError("cannot create pcap file: " + path.string());
  }
  write_pcap(out, packets, precision, link_type);
}

std::vector<RawPacket> read_pcap_files(const std::vector<std::filesystem::path>& paths) {
  std::vector<RawPacket> all;
  std::uint64_t uid = 0;
  for (const auto& path : paths) {
    auto res = read_pcap_file(path, uid);
    uid += res.packets.size();
    all.insert(all.end(), std::make_move_iterator(res.packets.begin()),
               std::make_move_iterator(res.packets.end()));
  }
  return all;
}

}  // namespace trafficbench
