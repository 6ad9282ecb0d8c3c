#include "trafficbench/packet.hpp"

#include "trafficbench/bytes.hpp"
#include "trafficbench/checksum.hpp"
#include "trafficbench/errors.hpp"

#include <span>

namespace trafficbench {

namespace {

constexpr std::uint16_t kEtherIpv4 = 0x0800;
constexpr std::uint16_t kEtherArp = 0x0806;
constexpr std::uint16_t kEtherIpv6 = 0x86DD;
constexpr std::uint16_t kEtherVlan = 0x8100;
constexpr std::uint16_t kEtherQinQ = 0x88A8;
constexpr std::uint16_t kEtherLldp = 0x88CC;

bool is_ipv6_extension(std::uint8_t next_header) {
  switch (next_header) {
    case 0:    // hop-by-hop
    case 43:   // routing
    case 44:   // fragment
    case 60:   // destination options
      return true;
    default:
      return false;
  }
}

void parse_tcp_options(TcpHeader& tcp) {
  const auto& opts = tcp.options;
  std::size_t i = 0;
  while (i < opts.size()) {
    const std::uint8_t kind = opts[i];
    tcp.options_kinds |= 1u << (kind < 31 ? kind : 31);
    if (kind == 0) break;  // end of option list
    if (kind == 1) {       // no-op
      ++i;
      continue;
    }
    if (i + 1 >= opts.size()) break;
    const std::uint8_t len = opts[i + 1];
    if (len < 2 || i + len > opts.size()) break;  // garbled; rest stays opaque
    if (kind == 8 && len == 10) {
      tcp.ts_present = true;
      tcp.ts_offset = static_cast<int>(i + 2);
      tcp.tsval = be32(opts.data() + i + 2);
      tcp.tsecr = be32(opts.data() + i + 6);
    }
    i += len;
  }
}

void decode_transport(ParsedPacket& pkt, std::uint8_t protocol) {
  const auto& bytes = pkt.raw.bytes;
  const std::size_t off = pkt.transport_offset;
  const std::size_t avail = bytes.size() - off;
  switch (protocol) {
    case 6: {  // tcp
      if (avail < 20) {
        pkt.malformed = MalformKind::transport;
        pkt.payload_offset = off;
        return;
      }
      TcpHeader tcp;
      tcp.src_port = be16(bytes.data() + off);
      tcp.dst_port = be16(bytes.data() + off + 2);
      tcp.seq_no = be32(bytes.data() + off + 4);
      tcp.ack_no = be32(bytes.data() + off + 8);
      tcp.data_offset = bytes[off + 12] >> 4;
      tcp.flags = bytes[off + 13];
      tcp.window = be16(bytes.data() + off + 14);
      tcp.checksum = be16(bytes.data() + off + 16);
      tcp.urgent_ptr = be16(bytes.data() + off + 18);
      const std::size_t hdr_len = static_cast<std::size_t>(tcp.data_offset) * 4;
      if (tcp.data_offset < 5 || hdr_len > avail) {
        pkt.malformed = MalformKind::transport;
        pkt.payload_offset = off;
        return;
      }
      tcp.options.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off + 20),
                         bytes.begin() + static_cast<std::ptrdiff_t>(off + hdr_len));
      parse_tcp_options(tcp);
      pkt.tcp = std::move(tcp);
      pkt.payload_offset = off + hdr_len;
      pkt.protocol_tag = "tcp";
      return;
    }
    case 17: {  // udp
      if (avail < 8) {
        pkt.malformed = MalformKind::transport;
        pkt.payload_offset = off;
        return;
      }
      UdpHeader udp;
      udp.src_port = be16(bytes.data() + off);
      udp.dst_port = be16(bytes.data() + off + 2);
      udp.length = be16(bytes.data() + off + 4);
      udp.checksum = be16(bytes.data() + off + 6);
      if (udp.length < 8) {
        pkt.malformed = MalformKind::transport;
        pkt.payload_offset = off;
        return;
      }
      pkt.udp = udp;
      pkt.payload_offset = off + 8;
      pkt.protocol_tag = "udp";
      return;
    }
    case 1:     // icmp
    case 58: {  // icmpv6
      if (avail < 4) {
        pkt.malformed = MalformKind::transport;
        pkt.payload_offset = off;
        return;
      }
      IcmpHeader icmp;
      icmp.type = bytes[off];
      icmp.code = bytes[off + 1];
      icmp.checksum = be16(bytes.data() + off + 2);
      pkt.icmp = icmp;
      pkt.payload_offset = off + (avail < 8 ? avail : 8);
      pkt.protocol_tag = protocol == 58 ? "icmpv6" : "icmp";
      return;
    }
    case 2:  // igmp
      pkt.payload_offset = off;
      pkt.protocol_tag = "igmp";
      return;
    default:
      pkt.payload_offset = off;
      pkt.protocol_tag = "unknown";
      return;
  }
}

void decode_ipv4(ParsedPacket& pkt) {
  const auto& bytes = pkt.raw.bytes;
  const std::size_t off = pkt.net_offset;
  const std::size_t avail = bytes.size() - off;
  if (avail < 20) {
    pkt.malformed = MalformKind::net;
    pkt.payload_offset = off;
    return;
  }
  Ipv4Header ip;
  ip.version = bytes[off] >> 4;
  ip.ihl = bytes[off] & 0x0F;
  ip.tos = bytes[off + 1];
  ip.total_length = be16(bytes.data() + off + 2);
  ip.id = be16(bytes.data() + off + 4);
  ip.flags = bytes[off + 6] >> 5;
  ip.frag_offset = be16(bytes.data() + off + 6) & 0x1FFF;
  ip.ttl = bytes[off + 8];
  ip.protocol = bytes[off + 9];
  ip.header_checksum = be16(bytes.data() + off + 10);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(off + 12),
            bytes.begin() + static_cast<std::ptrdiff_t>(off + 16), ip.src.begin());
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(off + 16),
            bytes.begin() + static_cast<std::ptrdiff_t>(off + 20), ip.dst.begin());
  const std::size_t hdr_len = static_cast<std::size_t>(ip.ihl) * 4;
  if (ip.ihl < 5 || hdr_len > avail) {
    pkt.malformed = MalformKind::net;
    pkt.payload_offset = off;
    return;
  }
  ip.options.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off + 20),
                    bytes.begin() + static_cast<std::ptrdiff_t>(off + hdr_len));
  const std::uint8_t protocol = ip.protocol;
  pkt.ipv4 = std::move(ip);
  pkt.transport_offset = off + hdr_len;
  pkt.payload_offset = pkt.transport_offset;
  pkt.protocol_tag = "ipv4";
  // A non-first fragment carries no transport header.
  if (pkt.ipv4->frag_offset != 0) {
    pkt.protocol_tag = "ipv4-fragment";
    return;
  }
  decode_transport(pkt, protocol);
}

void decode_ipv6(ParsedPacket& pkt) {
  const auto& bytes = pkt.raw.bytes;
  const std::size_t off = pkt.net_offset;
  const std::size_t avail = bytes.size() - off;
  if (avail < 40) {
    pkt.malformed = MalformKind::net;
    pkt.payload_offset = off;
    return;
  }
  Ipv6Header ip;
  ip.version = bytes[off] >> 4;
  ip.traffic_class = static_cast<std::uint8_t>(((bytes[off] & 0x0F) << 4) |
                                               (bytes[off + 1] >> 4));
  ip.flow_label = (static_cast<std::uint32_t>(bytes[off + 1] & 0x0F) << 16) |
                  (static_cast<std::uint32_t>(bytes[off + 2]) << 8) | bytes[off + 3];
  ip.payload_length = be16(bytes.data() + off + 4);
  ip.next_header = bytes[off + 6];
  ip.hop_limit = bytes[off + 7];
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(off + 8),
            bytes.begin() + static_cast<std::ptrdiff_t>(off + 24), ip.src.begin());
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(off + 24),
            bytes.begin() + static_cast<std::ptrdiff_t>(off + 40), ip.dst.begin());

  std::size_t cursor = off + 40;
  std::uint8_t next = ip.next_header;
  while (is_ipv6_extension(next)) {
    if (cursor + 8 > bytes.size()) {
      pkt.malformed = MalformKind::net;
      pkt.payload_offset = cursor;
      pkt.ipv6 = std::move(ip);
      pkt.protocol_tag = "ipv6";
      return;
    }
    const std::uint8_t inner = bytes[cursor];
    const std::size_t ext_len =
        next == 44 ? 8 : (static_cast<std::size_t>(bytes[cursor + 1]) + 1) * 8;
    if (cursor + ext_len > bytes.size()) {
      pkt.malformed = MalformKind::net;
      pkt.payload_offset = cursor;
      pkt.ipv6 = std::move(ip);
      pkt.protocol_tag = "ipv6";
      return;
    }
    cursor += ext_len;
    next = inner;
  }
  ip.ext.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off + 40),
                bytes.begin() + static_cast<std::ptrdiff_t>(cursor));
  ip.final_next_header = next;
  pkt.ipv6 = std::move(ip);
  pkt.transport_offset = cursor;
  pkt.payload_offset = cursor;
  pkt.protocol_tag = "ipv6";
  decode_transport(pkt, next);
}

}  // namespace

LinkKind link_kind_for(std::uint32_t pcap_link_type) {
  switch (pcap_link_type) {
    case 1: return LinkKind::ethernet;
    case 101: return LinkKind::raw_ip;
    default: return LinkKind::unsupported;
  }
}

ParsedPacket decode(const RawPacket& raw, LinkKind link_hint) {
  ParsedPacket pkt;
  pkt.raw = raw;
  pkt.link = link_hint;
  const auto& bytes = pkt.raw.bytes;

  if (link_hint == LinkKind::unsupported || link_hint == LinkKind::none) {
    pkt.protocol_tag = "unsupported";
    pkt.net_offset = pkt.transport_offset = pkt.payload_offset = 0;
    return pkt;
  }

  if (link_hint == LinkKind::ethernet) {
    if (bytes.size() < 14) {
      pkt.malformed = MalformKind::link;
      pkt.protocol_tag = "unknown";
      return pkt;
    }
    std::size_t off = 12;
    std::uint16_t ether_type = be16(bytes.data() + off);
    // Up to two VLAN tags are skipped transparently.
    while ((ether_type == kEtherVlan || ether_type == kEtherQinQ) &&
           pkt.vlan_tags.size() < 2) {
      if (off + 6 > bytes.size()) {
        pkt.malformed = MalformKind::link;
        return pkt;
      }
      pkt.vlan_tags.push_back({ether_type, be16(bytes.data() + off + 2)});
      off += 4;
      ether_type = be16(bytes.data() + off);
    }
    const std::size_t next = off + 2;
    pkt.net_offset = pkt.transport_offset = pkt.payload_offset = next;
    if (ether_type == kEtherIpv4) {
      decode_ipv4(pkt);
    } else if (ether_type == kEtherIpv6) {
      decode_ipv6(pkt);
    } else if (ether_type == kEtherArp) {
      pkt.protocol_tag = "arp";
    } else if (ether_type == kEtherLldp) {
      pkt.protocol_tag = "lldp";
    } else if (ether_type < 0x0600) {
      pkt.protocol_tag = "llc";  // 802.3 length field
    } else {
      pkt.protocol_tag = "unknown";
    }
    return pkt;
  }

  // raw ip
  pkt.net_offset = pkt.transport_offset = pkt.payload_offset = 0;
  if (bytes.empty()) {
    pkt.malformed = MalformKind::net;
    return pkt;
  }
  const std::uint8_t version = bytes[0] >> 4;
  if (version == 4) {
    decode_ipv4(pkt);
  } else if (version == 6) {
    decode_ipv6(pkt);
  } else {
    pkt.malformed = MalformKind::net;
  }
  return pkt;
}

ParsedPacket decode(const RawPacket& raw) { return decode(raw, link_kind_for(raw.link_type)); }

std::optional<std::size_t> declared_segment_length(const ParsedPacket& pkt) {
  if (pkt.ipv4) {
    const std::size_t hdr = static_cast<std::size_t>(pkt.ipv4->ihl) * 4;
    if (pkt.ipv4->total_length < hdr) return std::nullopt;
    return static_cast<std::size_t>(pkt.ipv4->total_length) - hdr;
  }
  if (pkt.ipv6) {
    const std::size_t ext = pkt.ipv6->ext.size();
    if (pkt.ipv6->payload_length < ext) return std::nullopt;
    return static_cast<std::size_t>(pkt.ipv6->payload_length) - ext;
  }
  return std::nullopt;
}

namespace {

void add_pseudo_header(ChecksumAccumulator& acc, const ParsedPacket& pkt,
                       std::uint8_t protocol, std::size_t seg_len) {
  if (pkt.ipv4) {
    acc.add(std::span<const std::uint8_t>(pkt.ipv4->src.data(), 4));
    acc.add(std::span<const std::uint8_t>(pkt.ipv4->dst.data(), 4));
    acc.add_u16(protocol);
    acc.add_u16(static_cast<std::uint16_t>(seg_len));
  } else if (pkt.ipv6) {
    acc.add(std::span<const std::uint8_t>(pkt.ipv6->src.data(), 16));
    acc.add(std::span<const std::uint8_t>(pkt.ipv6->dst.data(), 16));
    acc.add_u32(static_cast<std::uint32_t>(seg_len));
    acc.add_u16(0);
    acc.add_u16(protocol);
  }
}

// Sum over pseudo-header + declared segment; nullopt when the capture does
// not hold the whole declared segment.
std::optional<std::uint16_t> transport_sum(const ParsedPacket& pkt, std::uint8_t protocol,
                                           std::size_t seg_len) {
  if (pkt.transport_offset + seg_len > pkt.raw.bytes.size()) return std::nullopt;
  ChecksumAccumulator acc;
  add_pseudo_header(acc, pkt, protocol, seg_len);
  acc.add(std::span<const std::uint8_t>(pkt.raw.bytes.data() + pkt.transport_offset,
                                        seg_len));
  return acc.finish();
}

}  // namespace

ChecksumReport verify_checksums(const ParsedPacket& pkt) {
  ChecksumReport report;
  if (pkt.ipv4 && pkt.malformed != MalformKind::net) {
    const std::size_t hdr = static_cast<std::size_t>(pkt.ipv4->ihl) * 4;
    if (pkt.net_offset + hdr <= pkt.raw.bytes.size()) {
      const std::uint16_t sum = internet_checksum(
          std::span<const std::uint8_t>(pkt.raw.bytes.data() + pkt.net_offset, hdr));
      report.ip = sum == 0 ? CheckState::ok : CheckState::bad;
    }
  }
  if (pkt.tcp && pkt.net_kind() != NetKind::none) {
    const auto seg = declared_segment_length(pkt);
    if (seg && *seg >= static_cast<std::size_t>(pkt.tcp->data_offset) * 4) {
      if (const auto sum = transport_sum(pkt, 6, *seg)) {
        report.tcp = *sum == 0 ? CheckState::ok : CheckState::bad;
      }
    }
  }
  if (pkt.udp && pkt.net_kind() != NetKind::none && pkt.udp->checksum != 0) {
    const std::size_t seg = pkt.udp->length;
    if (seg >= 8) {
      if (const auto sum = transport_sum(pkt, 17, seg)) {
        report.udp = *sum == 0 ? CheckState::ok : CheckState::bad;
      }
    }
  }
  return report;
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(std::string("reserialize: ") + what);
}

void serialize_ipv4(const Ipv4Header& ip, std::vector<std::uint8_t>& out) {
  require(ip.version <= 15, "ipv4 version exceeds 4 bits");
  require(ip.ihl >= 5 && ip.ihl <= 15, "ipv4 ihl out of range");
  require(ip.options.size() == (static_cast<std::size_t>(ip.ihl) - 5) * 4,
          "ipv4 options length inconsistent with ihl");
  require(ip.flags <= 7, "ipv4 flags exceed 3 bits");
  require(ip.frag_offset <= 0x1FFF, "ipv4 fragment offset exceeds 13 bits");
  std::uint8_t buf[20];
  buf[0] = static_cast<std::uint8_t>((ip.version << 4) | ip.ihl);
  buf[1] = ip.tos;
  put_be16(buf + 2, ip.total_length);
  put_be16(buf + 4, ip.id);
  put_be16(buf + 6, static_cast<std::uint16_t>((ip.flags << 13) | ip.frag_offset));
  buf[8] = ip.ttl;
  buf[9] = ip.protocol;
  put_be16(buf + 10, ip.header_checksum);
  std::copy(ip.src.begin(), ip.src.end(), buf + 12);
  std::copy(ip.dst.begin(), ip.dst.end(), buf + 16);
  out.insert(out.end(), buf, buf + 20);
  out.insert(out.end(), ip.options.begin(), ip.options.end());
}

void serialize_ipv6(const Ipv6Header& ip, std::vector<std::uint8_t>& out) {
  require(ip.version <= 15, "ipv6 version exceeds 4 bits");
  require(ip.flow_label <= 0xFFFFF, "ipv6 flow label exceeds 20 bits");
  std::uint8_t buf[40];
  buf[0] = static_cast<std::uint8_t>((ip.version << 4) | (ip.traffic_class >> 4));
  buf[1] = static_cast<std::uint8_t>(((ip.traffic_class & 0x0F) << 4) |
                                     ((ip.flow_label >> 16) & 0x0F));
  buf[2] = static_cast<std::uint8_t>((ip.flow_label >> 8) & 0xFF);
  buf[3] = static_cast<std::uint8_t>(ip.flow_label & 0xFF);
  put_be16(buf + 4, ip.payload_length);
  buf[6] = ip.next_header;
  buf[7] = ip.hop_limit;
  std::copy(ip.src.begin(), ip.src.end(), buf + 8);
  std::copy(ip.dst.begin(), ip.dst.end(), buf + 24);
  out.insert(out.end(), buf, buf + 40);
  out.insert(out.end(), ip.ext.begin(), ip.ext.end());
}

void serialize_tcp(const TcpHeader& tcp, std::vector<std::uint8_t>& out) {
  require(tcp.data_offset >= 5 && tcp.data_offset <= 15, "tcp data offset out of range");
  require(tcp.options.size() == (static_cast<std::size_t>(tcp.data_offset) - 5) * 4,
          "tcp options length inconsistent with data offset");
  std::uint8_t buf[20];
  put_be16(buf, tcp.src_port);
  put_be16(buf + 2, tcp.dst_port);
  put_be32(buf + 4, tcp.seq_no);
  put_be32(buf + 8, tcp.ack_no);
  buf[12] = static_cast<std::uint8_t>(tcp.data_offset << 4);
  buf[13] = tcp.flags;
  put_be16(buf + 14, tcp.window);
  put_be16(buf + 16, tcp.checksum);
  put_be16(buf + 18, tcp.urgent_ptr);
  out.insert(out.end(), buf, buf + 20);
  out.insert(out.end(), tcp.options.begin(), tcp.options.end());
}

void serialize_udp(const UdpHeader& udp, std::vector<std::uint8_t>& out) {
  std::uint8_t buf[8];
  put_be16(buf, udp.src_port);
  put_be16(buf + 2, udp.dst_port);
  put_be16(buf + 4, udp.length);
  put_be16(buf + 6, udp.checksum);
  out.insert(out.end(), buf, buf + 8);
}

void serialize_icmp(const ParsedPacket& pkt, std::vector<std::uint8_t>& out) {
  std::uint8_t buf[4];
  buf[0] = pkt.icmp->type;
  buf[1] = pkt.icmp->code;
  put_be16(buf + 2, pkt.icmp->checksum);
  out.insert(out.end(), buf, buf + 4);
  // "rest of header" bytes are kept verbatim
  const std::size_t rest_begin = pkt.transport_offset + 4;
  if (pkt.payload_offset > rest_begin) {
    out.insert(out.end(), pkt.raw.bytes.begin() + static_cast<std::ptrdiff_t>(rest_begin),
               pkt.raw.bytes.begin() + static_cast<std::ptrdiff_t>(pkt.payload_offset));
  }
}

}  // namespace

std::vector<std::uint8_t> reserialize(const ParsedPacket& pkt) {
  require(pkt.malformed == MalformKind::none, "packet is marked malformed");
  std::vector<std::uint8_t> out;
  out.reserve(pkt.raw.bytes.size());
  // link prefix (ethernet + vlan tags, or nothing) is never mutated
  out.insert(out.end(), pkt.raw.bytes.begin(),
             pkt.raw.bytes.begin() + static_cast<std::ptrdiff_t>(pkt.net_offset));
  if (pkt.ipv4) {
    serialize_ipv4(*pkt.ipv4, out);
  } else if (pkt.ipv6) {
    serialize_ipv6(*pkt.ipv6, out);
  }
  if (pkt.tcp) {
    serialize_tcp(*pkt.tcp, out);
  } else if (pkt.udp) {
    serialize_udp(*pkt.udp, out);
  } else if (pkt.icmp) {
    serialize_icmp(pkt, out);
  }
  out.insert(out.end(), pkt.raw.bytes.begin() + static_cast<std::ptrdiff_t>(pkt.payload_offset),
             pkt.raw.bytes.end());
  return out;
}

void rebuild(ParsedPacket& pkt) {
  pkt.raw.bytes = reserialize(pkt);
  pkt.raw.orig_len = static_cast<std::uint32_t>(pkt.raw.bytes.size());
  pkt.raw.truncated = false;
}

void set_tcp_timestamps(ParsedPacket& pkt, std::uint32_t tsval, std::uint32_t tsecr) {
  if (!pkt.tcp || !pkt.tcp->ts_present || pkt.tcp->ts_offset < 0) return;
  pkt.tcp->tsval = tsval;
  pkt.tcp->tsecr = tsecr;
  put_be32(pkt.tcp->options.data() + pkt.tcp->ts_offset, tsval);
  put_be32(pkt.tcp->options.data() + pkt.tcp->ts_offset + 4, tsecr);
}

void set_checksums_valid(ParsedPacket& pkt) {
  if (pkt.ipv4) {
    pkt.ipv4->header_checksum = 0;
    std::vector<std::uint8_t> hdr;
    serialize_ipv4(*pkt.ipv4, hdr);
    pkt.ipv4->header_checksum = internet_checksum(hdr);
  }
  const bool has_net = pkt.net_kind() != NetKind::none;
  if (pkt.tcp) {
    if (!has_net) {
      pkt.tcp->checksum = 0;
    } else if (const auto seg = declared_segment_length(pkt)) {
      const std::size_t hdr_len = static_cast<std::size_t>(pkt.tcp->data_offset) * 4;
      const std::size_t payload_len =
          pkt.raw.bytes.size() >= pkt.payload_offset ? pkt.raw.bytes.size() - pkt.payload_offset
                                                     : 0;
      if (*seg >= hdr_len && *seg - hdr_len <= payload_len) {
        pkt.tcp->checksum = 0;
        ChecksumAccumulator acc;
        add_pseudo_header(acc, pkt, 6, *seg);
        std::vector<std::uint8_t> hdr;
        serialize_tcp(*pkt.tcp, hdr);
        acc.add(hdr);
        acc.add(std::span<const std::uint8_t>(pkt.raw.bytes.data() + pkt.payload_offset,
                                              *seg - hdr_len));
        pkt.tcp->checksum = acc.finish();
      }
    }
  }
  if (pkt.udp && pkt.udp->checksum != 0) {
    if (!has_net) {
      pkt.udp->checksum = 0;
    } else {
      const std::size_t seg = pkt.udp->length;
      const std::size_t payload_len =
          pkt.raw.bytes.size() >= pkt.payload_offset ? pkt.raw.bytes.size() - pkt.payload_offset
                                                     : 0;
      if (seg >= 8 && seg - 8 <= payload_len) {
        pkt.udp->checksum = 0;
        ChecksumAccumulator acc;
        add_pseudo_header(acc, pkt, 17, seg);
        std::vector<std::uint8_t> hdr;
        serialize_udp(*pkt.udp, hdr);
        acc.add(hdr);
        acc.add(std::span<const std::uint8_t>(pkt.raw.bytes.data() + pkt.payload_offset,
                                              seg - 8));
        std::uint16_t sum = acc.finish();
        pkt.udp->checksum = sum == 0 ? 0xFFFF : sum;  // zero means "no checksum"
      }
    }
  }
  rebuild(pkt);
}

}  // namespace trafficbench
