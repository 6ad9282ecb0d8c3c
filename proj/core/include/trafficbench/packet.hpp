#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trafficbench/pcap.hpp"

namespace trafficbench {

enum class LinkKind { ethernet, raw_ip, unsupported, none };
enum class NetKind { none, ipv4, ipv6 };
enum class TransportKind { none, tcp, udp, icmp };
enum class MalformKind { none, link, net, transport };
enum class CheckState { ok, bad, not_applicable };

struct VlanTag {
  std::uint16_t tpid = 0;
  std::uint16_t tci = 0;
};

struct Ipv4Header {
  std::uint8_t version = 4;
  std::uint8_t ihl = 5;  // 32-bit words
  std::uint8_t tos = 0;
  std::uint16_t total_length = 0;
  std::uint16_t id = 0;
  std::uint8_t flags = 0;         // 3 bits
  std::uint16_t frag_offset = 0;  // 13 bits
  std::uint8_t ttl = 0;
  std::uint8_t protocol = 0;
  std::uint16_t header_checksum = 0;
  std::array<std::uint8_t, 4> src{};
  std::array<std::uint8_t, 4> dst{};
  std::vector<std::uint8_t> options;  // verbatim, (ihl-5)*4 bytes
};

struct Ipv6Header {
  std::uint8_t version = 6;
  std::uint8_t traffic_class = 0;
  std::uint32_t flow_label = 0;  // 20 bits
  std::uint16_t payload_length = 0;
  std::uint8_t next_header = 0;
  std::uint8_t hop_limit = 0;
  std::array<std::uint8_t, 16> src{};
  std::array<std::uint8_t, 16> dst{};
  std::vector<std::uint8_t> ext;         // extension header chain, verbatim
  std::uint8_t final_next_header = 0;    // protocol after the extension chain
};

struct TcpHeader {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint32_t seq_no = 0;
  std::uint32_t ack_no = 0;
  std::uint8_t data_offset = 5;  // 32-bit words
  std::uint8_t flags = 0;
  std::uint16_t window = 0;
  std::uint16_t checksum = 0;
  std::uint16_t urgent_ptr = 0;
  std::vector<std::uint8_t> options;  // verbatim, (data_offset-5)*4 bytes
  bool ts_present = false;
  std::uint32_t tsval = 0;
  std::uint32_t tsecr = 0;
  int ts_offset = -1;               // offset of TSval inside options
  std::uint32_t options_kinds = 0;  // bit per option kind; kinds > 31 collapse to bit 31
};

struct UdpHeader {
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint16_t length = 0;
  std::uint16_t checksum = 0;
};

struct IcmpHeader {
  std::uint8_t type = 0;
  std::uint8_t code = 0;
  std::uint16_t checksum = 0;
};

struct ParsedPacket {
  RawPacket raw;
  LinkKind link = LinkKind::unsupported;
  std::vector<VlanTag> vlan_tags;
  std::optional<Ipv4Header> ipv4;
  std::optional<Ipv6Header> ipv6;
  std::optional<TcpHeader> tcp;
  std::optional<UdpHeader> udp;
  std::optional<IcmpHeader> icmp;
  std::size_t net_offset = 0;        // first byte of the network header
  std::size_t transport_offset = 0;  // first byte of the transport header
  std::size_t payload_offset = 0;    // first byte of application payload
  MalformKind malformed = MalformKind::none;
  std::string protocol_tag = "unknown";

  NetKind net_kind() const {
    return ipv4 ? NetKind::ipv4 : ipv6 ? NetKind::ipv6 : NetKind::none;
  }
  TransportKind transport_kind() const {
    return tcp ? TransportKind::tcp
               : udp ? TransportKind::udp : icmp ? TransportKind::icmp : TransportKind::none;
  }
  std::size_t size() const { return raw.bytes.size(); }
};

struct ChecksumReport {
  CheckState ip = CheckState::not_applicable;
  CheckState tcp = CheckState::not_applicable;
  CheckState udp = CheckState::not_applicable;
};

LinkKind link_kind_for(std::uint32_t pcap_link_type);

/// Decodes every recognized layer. Never throws on packet content: a header
/// that claims more bytes than the capture holds marks the packet malformed
/// at that layer and decoding stops at the last sound boundary.
ParsedPacket decode(const RawPacket& raw, LinkKind link_hint);
ParsedPacket decode(const RawPacket& raw);  // hint taken from raw.link_type

/// IPv4 header checksum over the header only; TCP/UDP over the pseudo-header
/// plus the declared segment, so capture truncation and ethernet trailer
/// padding yield not_applicable / correct results respectively. A zero UDP
/// checksum is not_applicable by definition.
ChecksumReport verify_checksums(const ParsedPacket& pkt);

/// Declared transport segment length (header + payload) from the network
/// layer's length fields; nullopt when it cannot be derived.
std::optional<std::size_t> declared_segment_length(const ParsedPacket& pkt);

/// Emits bytes reflecting the current field values. Slices the packet's link
/// prefix, option bytes, and payload verbatim from raw. Throws
/// ValidationError when a field value exceeds its wire width or the packet is
/// malformed.
std::vector<std::uint8_t> reserialize(const ParsedPacket& pkt);

/// raw.bytes = reserialize(pkt); refreshes orig_len. Layout offsets are
/// unchanged (header sizes are fixed by ihl/data_offset).
void rebuild(ParsedPacket& pkt);

/// Recomputes stored checksum fields so verify_checksums reports ok for every
/// applicable layer. A transport checksum without a network layer to build a
/// pseudo-header from is zeroed instead (a stale sum would fingerprint the
/// removed addresses). Zero UDP checksums stay zero. Rebuilds raw bytes.
void set_checksums_valid(ParsedPacket& pkt);

/// Updates tcp fields and patches the option bytes in place; no-op when the
/// timestamp option is absent. Does not rebuild.
void set_tcp_timestamps(ParsedPacket& pkt, std::uint32_t tsval, std::uint32_t tsecr);

}  // namespace trafficbench
