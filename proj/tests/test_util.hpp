#pragma once

// Hand-rolled ethernet/IPv4 frame builders and a pedestrian RFC 1071 sum,
// written independently of the library's codec so tests cross-check two
// implementations instead of one against itself.

#include <array>
#include <cstdint>
#include <vector>

#include "trafficbench/pcap.hpp"

namespace tbtest {

inline std::uint16_t ref_checksum(const std::vector<std::uint8_t>& bytes) {
  std::uint32_t sum = 0;
  std::size_t i = 0;
  for (; i + 1 < bytes.size(); i += 2) {
    sum += static_cast<std::uint32_t>((bytes[i] << 8) | bytes[i + 1]);
  }
  if (i < bytes.size()) sum += static_cast<std::uint32_t>(bytes[i] << 8);
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

inline void push16(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x & 0xFF));
}

inline void push32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  push16(v, static_cast<std::uint16_t>(x >> 16));
  push16(v, static_cast<std::uint16_t>(x & 0xFFFF));
}

struct FrameSpec {
  std::array<std::uint8_t, 4> src{10, 0, 0, 1};
  std::array<std::uint8_t, 4> dst{10, 0, 0, 2};
  std::uint16_t sport = 1234;
  std::uint16_t dport = 443;
  std::uint32_t seq = 100;
  std::uint32_t ack = 200;
  std::uint8_t tcp_flags = 0x18;  // PSH|ACK
  std::uint16_t window = 4096;
  std::uint16_t urgent = 0;
  std::uint8_t ttl = 64;
  std::uint16_t ip_id = 7;
  std::uint8_t tos = 0;
  bool with_ts = false;  // adds NOP NOP Timestamp options
  std::uint32_t tsval = 0;
  std::uint32_t tsecr = 0;
  bool break_ip_checksum = false;
  bool break_transport_checksum = false;
  std::size_t pad_to = 0;  // ethernet trailer padding
  std::vector<std::uint8_t> payload;
};

inline std::vector<std::uint8_t> ethernet_header() {
  std::vector<std::uint8_t> b;
  for (int i = 0; i < 6; ++i) b.push_back(static_cast<std::uint8_t>(0x10 + i));
  for (int i = 0; i < 6; ++i) b.push_back(static_cast<std::uint8_t>(0x20 + i));
  push16(b, 0x0800);
  return b;
}

inline std::vector<std::uint8_t> ipv4_header(const FrameSpec& s, std::uint8_t proto,
                                             std::size_t l4_len) {
  std::vector<std::uint8_t> b;
  b.push_back(0x45);
  b.push_back(s.tos);
  push16(b, static_cast<std::uint16_t>(20 + l4_len));
  push16(b, s.ip_id);
  push16(b, 0x4000);  // DF
  b.push_back(s.ttl);
  b.push_back(proto);
  push16(b, 0);  // checksum slot
  b.insert(b.end(), s.src.begin(), s.src.end());
  b.insert(b.end(), s.dst.begin(), s.dst.end());
  std::uint16_t sum = ref_checksum(b);
  if (s.break_ip_checksum) sum = static_cast<std::uint16_t>(sum ^ 0x1111);
  b[10] = static_cast<std::uint8_t>(sum >> 8);
  b[11] = static_cast<std::uint8_t>(sum & 0xFF);
  return b;
}

inline std::uint16_t l4_checksum(const FrameSpec& s, std::uint8_t proto,
                                 const std::vector<std::uint8_t>& segment) {
  std::vector<std::uint8_t> pseudo;
  pseudo.insert(pseudo.end(), s.src.begin(), s.src.end());
  pseudo.insert(pseudo.end(), s.dst.begin(), s.dst.end());
  pseudo.push_back(0);
  pseudo.push_back(proto);
  push16(pseudo, static_cast<std::uint16_t>(segment.size()));
  pseudo.insert(pseudo.end(), segment.begin(), segment.end());
  return ref_checksum(pseudo);
}

inline std::vector<std::uint8_t> tcp_frame(const FrameSpec& s) {
  std::vector<std::uint8_t> seg;
  push16(seg, s.sport);
  push16(seg, s.dport);
  push32(seg, s.seq);
  push32(seg, s.ack);
  const std::uint8_t data_offset = s.with_ts ? 8 : 5;
  seg.push_back(static_cast<std::uint8_t>(data_offset << 4));
  seg.push_back(s.tcp_flags);
  push16(seg, s.window);
  push16(seg, 0);  // checksum slot
  push16(seg, s.urgent);
  if (s.with_ts) {
    seg.push_back(1);  // NOP
    seg.push_back(1);  // NOP
    seg.push_back(8);  // Timestamp
    seg.push_back(10);
    push32(seg, s.tsval);
    push32(seg, s.tsecr);
  }
  seg.insert(seg.end(), s.payload.begin(), s.payload.end());
  std::uint16_t sum = l4_checksum(s, 6, seg);
  if (s.break_transport_checksum) sum = static_cast<std::uint16_t>(sum ^ 0x2222);
  seg[16] = static_cast<std::uint8_t>(sum >> 8);
  seg[17] = static_cast<std::uint8_t>(sum & 0xFF);

  auto frame = ethernet_header();
  const auto ip = ipv4_header(s, 6, seg.size());
  frame.insert(frame.end(), ip.begin(), ip.end());
  frame.insert(frame.end(), seg.begin(), seg.end());
  while (frame.size() < s.pad_to) frame.push_back(0);
  return frame;
}

inline std::vector<std::uint8_t> udp_frame(const FrameSpec& s, bool zero_checksum = false) {
  std::vector<std::uint8_t> seg;
  push16(seg, s.sport);
  push16(seg, s.dport);
  push16(seg, static_cast<std::uint16_t>(8 + s.payload.size()));
  push16(seg, 0);
  seg.insert(seg.end(), s.payload.begin(), s.payload.end());
  if (!zero_checksum) {
    std::uint16_t sum = l4_checksum(s, 17, seg);
    if (sum == 0) sum = 0xFFFF;
    if (s.break_transport_checksum) sum = static_cast<std::uint16_t>(sum ^ 0x2222);
    seg[6] = static_cast<std::uint8_t>(sum >> 8);
    seg[7] = static_cast<std::uint8_t>(sum & 0xFF);
  }
  auto frame = ethernet_header();
  const auto ip = ipv4_header(s, 17, seg.size());
  frame.insert(frame.end(), ip.begin(), ip.end());
  frame.insert(frame.end(), seg.begin(), seg.end());
  while (frame.size() < s.pad_to) frame.push_back(0);
  return frame;
}

inline trafficbench::RawPacket raw_of(std::vector<std::uint8_t> bytes, std::uint64_t uid,
                                      std::uint32_t sec = 0, std::uint32_t frac = 0) {
  trafficbench::RawPacket raw;
  raw.uid = uid;
  raw.ts_sec = sec;
  raw.ts_frac = frac;
  raw.orig_len = static_cast<std::uint32_t>(bytes.size());
  raw.link_type = 1;
  raw.trace_id = "test";
  raw.bytes = std::move(bytes);
  return raw;
}

}  // namespace tbtest
