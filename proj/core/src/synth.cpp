#include "trafficbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "trafficbench/bytes.hpp"
#include "trafficbench/errors.hpp"
#include "trafficbench/flow.hpp"
#include "trafficbench/packet.hpp"
#include "trafficbench/rng.hpp"

namespace trafficbench {

const char* class_signal_name(ClassSignal s) {
  switch (s) {
    case ClassSignal::none: return "none";
    case ClassSignal::server_ip_per_class: return "server_ip_per_class";
    case ClassSignal::payload_length_per_class: return "payload_length_per_class";
  }
  return "?";
}

ClassSignal class_signal_from(const std::string& name) {
  if (name == "none") return ClassSignal::none;
  if (name == "server_ip_per_class" || name == "server-ip") {
    return ClassSignal::server_ip_per_class;
  }
  if (name == "payload_length_per_class" || name == "payload-length") {
    return ClassSignal::payload_length_per_class;
  }
  throw ValidationError("unknown class signal: " + name);
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec spec;
  if (j.contains("n_classes")) spec.n_classes = j.at("n_classes").get<std::size_t>();
  if (j.contains("flows_per_class")) {
    spec.flows_per_class = j.at("flows_per_class").get<std::size_t>();
  }
  if (j.contains("packets_per_flow")) {
    spec.packets_per_flow = j.at("packets_per_flow").get<std::size_t>();
  }
  if (j.contains("geometric_mean")) spec.geometric_mean = j.at("geometric_mean").get<double>();
  if (j.contains("packets_cap")) spec.packets_cap = j.at("packets_cap").get<std::size_t>();
  if (j.contains("class_signal")) {
    spec.signal = class_signal_from(j.at("class_signal").get<std::string>());
  }
  if (!j.contains("seed")) throw ValidationError("synth spec needs a seed");
  spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("extraneous")) {
    for (const auto& [tag, count] : j.at("extraneous").items()) {
      spec.extraneous[tag] = count.get<std::size_t>();
    }
  }
  if (spec.n_classes < 1 || spec.flows_per_class < 1 || spec.packets_per_flow < 1) {
    throw ValidationError("synth counts must be >= 1");
  }
  return spec;
}

nlohmann::ordered_json SynthSpec::to_json() const {
  nlohmann::ordered_json j;
  j["n_classes"] = n_classes;
  j["flows_per_class"] = flows_per_class;
  j["packets_per_flow"] = packets_per_flow;
  j["geometric_mean"] = geometric_mean;
  j["packets_cap"] = packets_cap;
  j["class_signal"] = class_signal_name(signal);
  j["seed"] = seed;
  nlohmann::ordered_json extra;
  for (const auto& [tag, count] : extraneous) extra[tag] = count;
  j["extraneous"] = std::move(extra);
  return j;
}

namespace {

constexpr std::uint64_t kClockBase = 1700000000;  // capture epoch, seconds
constexpr std::uint32_t kWindowSeconds = 60;

struct Endpoint {
  std::array<std::uint8_t, 4> addr{};
  std::uint16_t port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint32_t tsval = 0;
  std::uint32_t tsecr = 0;
};

std::array<std::uint8_t, 6> mac_for(const std::array<std::uint8_t, 4>& addr,
                                    std::uint16_t port) {
  // locally administered, derived from the endpoint identity
  return {0x02, static_cast<std::uint8_t>(port >> 8), addr[0], addr[1], addr[2], addr[3]};
}

void put_ethernet(std::vector<std::uint8_t>& out, const std::array<std::uint8_t, 6>& dst,
                  const std::array<std::uint8_t, 6>& src, std::uint16_t ethertype) {
  out.insert(out.end(), dst.begin(), dst.end());
  out.insert(out.end(), src.begin(), src.end());
  std::uint8_t et[2];
  put_be16(et, ethertype);
  out.insert(out.end(), et, et + 2);
}

void put_ipv4(std::vector<std::uint8_t>& out, const std::array<std::uint8_t, 4>& src,
              const std::array<std::uint8_t, 4>& dst, std::uint8_t protocol,
              std::uint16_t payload_len, std::uint8_t ttl) {
  std::uint8_t hdr[20] = {};
  hdr[0] = 0x45;
  put_be16(hdr + 2, static_cast<std::uint16_t>(20 + payload_len));
  put_be16(hdr + 6, 0x4000);  // DF, id 0
  hdr[8] = ttl;
  hdr[9] = protocol;
  std::copy(src.begin(), src.end(), hdr + 12);
  std::copy(dst.begin(), dst.end(), hdr + 16);
  out.insert(out.end(), hdr, hdr + 20);
}

void put_tcp(std::vector<std::uint8_t>& out, const Endpoint& from, const Endpoint& to) {
  std::uint8_t hdr[32] = {};
  put_be16(hdr, from.port);
  put_be16(hdr + 2, to.port);
  put_be32(hdr + 4, from.seq);
  put_be32(hdr + 8, from.ack);
  hdr[12] = 8 << 4;   // 32-byte header: 20 + NOP NOP Timestamp
  hdr[13] = 0x18;     // ACK | PSH
  put_be16(hdr + 14, 65535);
  hdr[20] = 1;  // NOP
  hdr[21] = 1;  // NOP
  hdr[22] = 8;  // timestamp option
  hdr[23] = 10;
  put_be32(hdr + 24, from.tsval);
  put_be32(hdr + 28, from.tsecr);
  out.insert(out.end(), hdr, hdr + 32);
}

void put_udp(std::vector<std::uint8_t>& out, std::uint16_t sport, std::uint16_t dport,
             std::uint16_t payload_len) {
  std::uint8_t hdr[8] = {};
  put_be16(hdr, sport);
  put_be16(hdr + 2, dport);
  put_be16(hdr + 4, static_cast<std::uint16_t>(8 + payload_len));
  out.insert(out.end(), hdr, hdr + 8);
}

RawPacket finish_packet(std::vector<std::uint8_t>&& bytes, std::uint64_t ts_sec,
                        std::uint32_t ts_ns) {
  RawPacket raw;
  raw.ts_sec = ts_sec;
  raw.ts_frac = ts_ns;
  raw.link_type = 1;  // ethernet
  raw.trace_id = "synth";
  raw.bytes = std::move(bytes);
  raw.orig_len = static_cast<std::uint32_t>(raw.bytes.size());
  ParsedPacket pkt = decode(raw);
  if (pkt.malformed != MalformKind::none) {
    throw ValidationError("generated packet failed to decode");
  }
  set_checksums_valid(pkt);
  return pkt.raw;
}

struct TimedPacket {
  RawPacket raw;
  std::string flow_label;  // empty = extraneous
  std::string flow_key;
};

std::size_t flow_length(const SynthSpec& spec, Rng& rng) {
  if (spec.geometric_mean <= 0.0) return spec.packets_per_flow;
  const double mean = std::max(1.0, spec.geometric_mean);
  const double p = 1.0 / mean;
  const double u = rng.unit();
  std::size_t len = 1;
  if (p < 1.0) {
    len = 1 + static_cast<std::size_t>(std::floor(std::log1p(-u) / std::log1p(-p)));
  }
  if (spec.packets_cap > 0) len = std::min(len, spec.packets_cap);
  return std::max<std::size_t>(1, len);
}

std::string class_label(std::size_t c) {
  std::string n = std::to_string(c);
  if (n.size() < 2) n.insert(n.begin(), '0');
  return "class" + n;
}

}  // namespace

SynthResult generate_trace(const SynthSpec& spec) {
  if (spec.n_classes < 1 || spec.flows_per_class < 1 || spec.packets_per_flow < 1) {
    throw ValidationError("synth counts must be >= 1");
  }
  SynthResult result;
  std::vector<TimedPacket> packets;
  std::set<std::string> used_keys;

  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t f = 0; f < spec.flows_per_class; ++f) {
      Rng rng(derive_seed(spec.seed, "synth.flow", c * spec.flows_per_class + f));

      Endpoint client;
      Endpoint server;
      std::string key;
      ParsedPacket probe;
      for (int attempt = 0;; ++attempt) {
        if (attempt > 1000) {
          throw ValidationError("cannot find an unused 5-tuple, corpus too dense");
        }
        client.addr = {10, static_cast<std::uint8_t>(rng.below(256)),
                       static_cast<std::uint8_t>(rng.below(256)),
                       static_cast<std::uint8_t>(rng.below(256))};
        // small pool: ports repeat across flows and classes
        client.port = static_cast<std::uint16_t>(49152 + rng.below(64));
        if (spec.signal == ClassSignal::server_ip_per_class) {
          server.addr = {198, 18, static_cast<std::uint8_t>(c / 250),
                         static_cast<std::uint8_t>(1 + c % 250)};
        } else {
          server.addr = {198, 18, static_cast<std::uint8_t>(rng.below(250)),
                         static_cast<std::uint8_t>(1 + rng.below(250))};
        }
        server.port = 443;

        std::vector<std::uint8_t> bytes;
        put_ethernet(bytes, mac_for(server.addr, server.port),
                     mac_for(client.addr, client.port), 0x0800);
        put_ipv4(bytes, client.addr, server.addr, 6, 32, 64);
        put_tcp(bytes, client, server);
        RawPacket raw;
        raw.link_type = 1;
        raw.bytes = std::move(bytes);
        probe = decode(raw);
        key = flow_key_string(flow_key(probe));
        if (used_keys.insert(key).second) break;
      }

      client.seq = rng.next_u32();
      server.seq = rng.next_u32();
      client.ack = server.seq;
      server.ack = client.seq;
      client.tsval = static_cast<std::uint32_t>(rng.below(1 << 16));
      server.tsval = static_cast<std::uint32_t>(rng.below(1 << 16));
      client.tsecr = server.tsval;
      server.tsecr = client.tsval;

      const std::string label = class_label(c);
      std::uint64_t ts_sec = kClockBase + rng.below(kWindowSeconds);
      std::uint32_t ts_ns = static_cast<std::uint32_t>(rng.below(1000000000));
      const std::size_t n_packets = flow_length(spec, rng);

      for (std::size_t p = 0; p < n_packets; ++p) {
        Endpoint& from = (p % 2 == 0) ? client : server;
        Endpoint& to = (p % 2 == 0) ? server : client;

        std::size_t payload_len;
        if (spec.signal == ClassSignal::payload_length_per_class) {
          payload_len = 60 + 10 * c;
        } else {
          payload_len = rng.range(20, 200);
        }
        std::vector<std::uint8_t> payload(payload_len);
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng.below(256));

        from.tsval += static_cast<std::uint32_t>(rng.range(1, 10));
        from.tsecr = to.tsval;

        std::vector<std::uint8_t> bytes;
        bytes.reserve(14 + 20 + 32 + payload_len);
        put_ethernet(bytes, mac_for(to.addr, to.port), mac_for(from.addr, from.port),
                     0x0800);
        put_ipv4(bytes, from.addr, to.addr, 6,
                 static_cast<std::uint16_t>(32 + payload_len), 64);
        put_tcp(bytes, from, to);
        bytes.insert(bytes.end(), payload.begin(), payload.end());

        TimedPacket tp;
        tp.raw = finish_packet(std::move(bytes), ts_sec, ts_ns);
        tp.flow_label = label;
        tp.flow_key = key;
        packets.push_back(std::move(tp));

        from.seq += static_cast<std::uint32_t>(payload_len);
        to.ack = from.seq;

        const std::uint64_t step_ns = (1 + rng.below(50)) * 1000000ULL;
        ts_ns += static_cast<std::uint32_t>(step_ns);
        if (ts_ns >= 1000000000) {
          ts_ns -= 1000000000;
          ++ts_sec;
        }
      }
    }
  }

  // extraneous packets for the cleaning tests
  for (const auto& [tag, count] : spec.extraneous) {
    if (tag != "arp" && tag != "mdns" && tag != "ntp") {
      throw ValidationError("unsupported extraneous tag: " + tag);
    }
    Rng rng(derive_seed(spec.seed, "synth.extra", fnv1a64(tag)));
    for (std::size_t i = 0; i < count; ++i) {
      const std::array<std::uint8_t, 4> host = {10, static_cast<std::uint8_t>(rng.below(256)),
                                                static_cast<std::uint8_t>(rng.below(256)),
                                                static_cast<std::uint8_t>(rng.below(256))};
      const auto src_mac = mac_for(host, 0);
      std::vector<std::uint8_t> bytes;
      if (tag == "arp") {
        put_ethernet(bytes, {0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF}, src_mac, 0x0806);
        std::uint8_t arp[28] = {};
        put_be16(arp, 1);       // ethernet
        put_be16(arp + 2, 0x0800);
        arp[4] = 6;
        arp[5] = 4;
        put_be16(arp + 6, 1);   // request
        std::copy(src_mac.begin(), src_mac.end(), arp + 8);
        std::copy(host.begin(), host.end(), arp + 14);
        arp[24] = 10;
        arp[25] = 0;
        arp[26] = 0;
        arp[27] = static_cast<std::uint8_t>(1 + rng.below(250));
        bytes.insert(bytes.end(), arp, arp + 28);
      } else if (tag == "mdns") {
        put_ethernet(bytes, {0x01, 0x00, 0x5E, 0x00, 0x00, 0xFB}, src_mac, 0x0800);
        std::vector<std::uint8_t> dns(20, 0);
        dns[5] = 1;  // one question
        put_ipv4(bytes, host, {224, 0, 0, 251}, 17,
                 static_cast<std::uint16_t>(8 + dns.size()), 255);
        put_udp(bytes, 5353, 5353, static_cast<std::uint16_t>(dns.size()));
        bytes.insert(bytes.end(), dns.begin(), dns.end());
      } else {
        const std::array<std::uint8_t, 4> ntp_server = {
            198, 18, 250, static_cast<std::uint8_t>(1 + rng.below(250))};
        put_ethernet(bytes, mac_for(ntp_server, 123), src_mac, 0x0800);
        std::vector<std::uint8_t> ntp(48, 0);
        ntp[0] = 0x1B;  // li=0 vn=3 mode=3 (client)
        put_ipv4(bytes, host, ntp_server, 17, static_cast<std::uint16_t>(8 + ntp.size()),
                 64);
        put_udp(bytes, static_cast<std::uint16_t>(49152 + rng.below(64)), 123,
                static_cast<std::uint16_t>(ntp.size()));
        bytes.insert(bytes.end(), ntp.begin(), ntp.end());
      }
      TimedPacket tp;
      tp.raw = finish_packet(std::move(bytes), kClockBase + rng.below(kWindowSeconds),
                             static_cast<std::uint32_t>(rng.below(1000000000)));
      packets.push_back(std::move(tp));
      ++result.extraneous_written[tag];
    }
  }

  std::stable_sort(packets.begin(), packets.end(), [](const TimedPacket& a,
                                                      const TimedPacket& b) {
    if (a.raw.ts_sec != b.raw.ts_sec) return a.raw.ts_sec < b.raw.ts_sec;
    return a.raw.ts_frac < b.raw.ts_frac;
  });

  nlohmann::ordered_json flows;
  std::set<std::string> labeled;
  for (auto& tp : packets) {
    if (!tp.flow_label.empty() && labeled.insert(tp.flow_key).second) {
      flows[tp.flow_key] = tp.flow_label;
    }
  }
  result.labels["flows"] = std::move(flows);
  if (!spec.extraneous.empty()) result.labels["default"] = "extraneous";

  result.packets.reserve(packets.size());
  for (std::size_t i = 0; i < packets.size(); ++i) {
    packets[i].raw.uid = i;
    result.packets.push_back(std::move(packets[i].raw));
  }
  return result;
}

void write_synth(const SynthResult& result, const std::string& dir) {
  write_pcap_file(dir + "/synth.pcap", result.packets, PcapPrecision::nano);
  std::ofstream out(dir + "/labels.json", std::ios::binary);
  if (!out) throw ValidationError("cannot write " + dir + "/labels.json");
  out << result.labels.dump(2) << '\n';
}

}  // namespace trafficbench
