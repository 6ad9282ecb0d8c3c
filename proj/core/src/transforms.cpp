#include "trafficbench/transforms.hpp"

#include <algorithm>

#include "trafficbench/errors.hpp"
#include "trafficbench/rng.hpp"

namespace trafficbench {

namespace {

struct KindName {
  TransformKind kind;
  const char* name;
};

constexpr KindName kKindNames[] = {
    {TransformKind::randomize_ip, "randomize_ip"},
    {TransformKind::zero_ip_addrs, "zero_ip_addrs"},
    {TransformKind::zero_ports, "zero_ports"},
    {TransformKind::randomize_ports, "randomize_ports"},
    {TransformKind::randomize_seq_ack, "randomize_seq_ack"},
    {TransformKind::randomize_tcp_timestamp, "randomize_tcp_timestamp"},
    {TransformKind::randomize_ttl, "randomize_ttl"},
    {TransformKind::strip_ip_header, "strip_ip_header"},
    {TransformKind::strip_transport_header, "strip_transport_header"},
    {TransformKind::strip_payload, "strip_payload"},
    {TransformKind::recompute_checksums, "recompute_checksums"},
};

bool mutates_bytes(TransformKind k) { return k != TransformKind::recompute_checksums; }

}  // namespace

const char* transform_kind_name(TransformKind k) {
  for (const auto& kn : kKindNames) {
    if (kn.kind == k) return kn.name;
  }
  return "?";
}

TransformKind transform_kind_from(const std::string& name) {
  for (const auto& kn : kKindNames) {
    if (name == kn.name) return kn.kind;
  }
  throw ValidationError("unknown transform: " + name);
}

const char* transform_scope_name(TransformScope s) {
  switch (s) {
    case TransformScope::train_only: return "train_only";
    case TransformScope::test_only: return "test_only";
    case TransformScope::both: return "both";
  }
  return "?";
}

TransformScope transform_scope_from(const std::string& name) {
  if (name == "train_only" || name == "train") return TransformScope::train_only;
  if (name == "test_only" || name == "test") return TransformScope::test_only;
  if (name == "both") return TransformScope::both;
  throw ValidationError("unknown transform scope: " + name);
}

TransformSpec TransformSpec::preset(const std::string& name, TransformScope scope,
                                    std::uint64_t seed) {
  TransformSpec spec;
  spec.scope = scope;
  spec.seed = seed;
  if (name == "etbert") {
    // strips the link+network prefix and hides ports
    spec.ops = {{TransformKind::zero_ports},
                {TransformKind::strip_ip_header}};
  } else if (name == "yatc") {
    spec.ops = {{TransformKind::randomize_ip, TransformMode::per_flow_consistent},
                {TransformKind::zero_ports}};
  } else if (name == "trafficformer") {
    spec.ops = {{TransformKind::randomize_ip, TransformMode::per_flow_consistent},
                {TransformKind::randomize_ports, TransformMode::per_flow_consistent}};
  } else if (name == "table5") {
    // destroys the implicit flow ids: sequence/ack numbers and tcp timestamps
    spec.ops = {{TransformKind::randomize_seq_ack, TransformMode::per_packet},
                {TransformKind::randomize_tcp_timestamp, TransformMode::per_packet}};
  } else if (name == "table6-no-ip") {
    spec.ops = {{TransformKind::zero_ip_addrs}};
  } else if (name == "table6-no-header") {
    spec.ops = {{TransformKind::strip_ip_header},
                {TransformKind::strip_transport_header}};
  } else if (name == "table6-no-payload") {
    spec.ops = {{TransformKind::strip_payload}};
  } else if (name == "anonymize-explicit-ids") {
    // removes every explicit flow id while keeping packets decodable
    spec.ops = {{TransformKind::randomize_ip, TransformMode::per_packet},
                {TransformKind::zero_ports}};
  } else {
    throw ValidationError("unknown transform preset: " + name);
  }
  return spec;
}

TransformSpec TransformSpec::from_json(const nlohmann::json& j) {
  if (j.contains("preset")) {
    TransformScope scope = TransformScope::both;
    if (j.contains("scope")) scope = transform_scope_from(j.at("scope").get<std::string>());
    std::uint64_t seed = 0;
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    return preset(j.at("preset").get<std::string>(), scope, seed);
  }
  TransformSpec spec;
  if (j.contains("scope")) {
    spec.scope = transform_scope_from(j.at("scope").get<std::string>());
  }
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("auto_recompute")) spec.auto_recompute = j.at("auto_recompute").get<bool>();
  if (!j.contains("ops")) throw ValidationError("transform spec needs 'ops' or 'preset'");
  for (const auto& op : j.at("ops")) {
    AtomicTransform at;
    if (op.is_string()) {
      at.kind = transform_kind_from(op.get<std::string>());
    } else {
      at.kind = transform_kind_from(op.at("kind").get<std::string>());
      if (op.contains("mode")) {
        const std::string mode = op.at("mode").get<std::string>();
        if (mode == "per_packet") {
          at.mode = TransformMode::per_packet;
        } else if (mode == "per_flow_consistent") {
          at.mode = TransformMode::per_flow_consistent;
        } else {
          throw ValidationError("unknown transform mode: " + mode);
        }
      }
    }
    spec.ops.push_back(at);
  }
  return spec;
}

nlohmann::ordered_json TransformSpec::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json listed = nlohmann::ordered_json::array();
  for (const auto& op : ops) {
    nlohmann::ordered_json o;
    o["kind"] = transform_kind_name(op.kind);
    o["mode"] = op.mode == TransformMode::per_packet ? "per_packet" : "per_flow_consistent";
    listed.push_back(o);
  }
  j["ops"] = listed;
  j["scope"] = transform_scope_name(scope);
  j["seed"] = seed;
  j["auto_recompute"] = auto_recompute;
  return j;
}

std::vector<AtomicTransform> TransformSpec::effective_ops() const {
  std::vector<AtomicTransform> out = ops;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].kind == TransformKind::recompute_checksums && i + 1 != out.size()) {
      throw ValidationError("recompute_checksums must be the last transform");
    }
  }
  const bool has_recompute =
      !out.empty() && out.back().kind == TransformKind::recompute_checksums;
  bool mutated = false;
  for (const auto& op : out) mutated = mutated || mutates_bytes(op.kind);
  if (auto_recompute && mutated && !has_recompute) {
    out.push_back({TransformKind::recompute_checksums});
  }
  return out;
}

TransformCounter& TransformReport::counter(const std::string& name) {
  for (auto& c : per_op) {
    if (c.name == name) return c;
  }
  per_op.push_back({name, 0, 0});
  return per_op.back();
}

nlohmann::ordered_json TransformReport::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& c : per_op) {
    nlohmann::ordered_json o;
    o["op"] = c.name;
    o["affected"] = c.affected;
    o["skipped"] = c.skipped;
    j.push_back(o);
  }
  return j;
}

namespace {

/// Stable per-flow value for one named quantity.
std::uint64_t flow_value(std::uint64_t seed, std::uint64_t flow_uid, const std::string& tag) {
  return splitmix64(derive_seed(seed, "transform.flow", flow_uid) ^ fnv1a64(tag));
}

std::string addr_tag(const std::uint8_t* a, std::size_t n) {
  std::string s = "ip:";
  for (std::size_t i = 0; i < n; ++i) {
    s += std::to_string(a[i]);
    s += '.';
  }
  return s;
}

void fill_addr(std::uint8_t* out, std::size_t n, std::uint64_t v) {
  for (std::size_t i = 0; i < n; ++i) {
    v = splitmix64(v);
    out[i] = static_cast<std::uint8_t>(v & 0xFF);
  }
}

bool do_randomize_ip(ParsedPacket& pkt, TransformMode mode, std::uint64_t seed,
                     std::uint64_t flow_uid, Rng& rng) {
  if (pkt.ipv4) {
    auto& ip = *pkt.ipv4;
    if (mode == TransformMode::per_packet) {
      for (auto& b : ip.src) b = static_cast<std::uint8_t>(rng.below(256));
      for (auto& b : ip.dst) b = static_cast<std::uint8_t>(rng.below(256));
    } else {
      fill_addr(ip.src.data(), 4, flow_value(seed, flow_uid, addr_tag(ip.src.data(), 4)));
      fill_addr(ip.dst.data(), 4, flow_value(seed, flow_uid, addr_tag(ip.dst.data(), 4)));
    }
    return true;
  }
  if (pkt.ipv6) {
    auto& ip = *pkt.ipv6;
    if (mode == TransformMode::per_packet) {
      for (auto& b : ip.src) b = static_cast<std::uint8_t>(rng.below(256));
      for (auto& b : ip.dst) b = static_cast<std::uint8_t>(rng.below(256));
    } else {
      fill_addr(ip.src.data(), 16, flow_value(seed, flow_uid, addr_tag(ip.src.data(), 16)));
      fill_addr(ip.dst.data(), 16, flow_value(seed, flow_uid, addr_tag(ip.dst.data(), 16)));
    }
    return true;
  }
  return false;
}

bool do_zero_ip_addrs(ParsedPacket& pkt) {
  if (pkt.ipv4) {
    pkt.ipv4->src.fill(0);
    pkt.ipv4->dst.fill(0);
    return true;
  }
  if (pkt.ipv6) {
    pkt.ipv6->src.fill(0);
    pkt.ipv6->dst.fill(0);
    return true;
  }
  return false;
}

bool do_ports(ParsedPacket& pkt, bool randomize, TransformMode mode, std::uint64_t seed,
              std::uint64_t flow_uid, Rng& rng) {
  auto next_port = [&](std::uint16_t old) -> std::uint16_t {
    if (!randomize) return 0;
    if (mode == TransformMode::per_packet) {
      return static_cast<std::uint16_t>(rng.below(65536));
    }
    return static_cast<std::uint16_t>(
        flow_value(seed, flow_uid, "port:" + std::to_string(old)) & 0xFFFF);
  };
  if (pkt.tcp) {
    pkt.tcp->src_port = next_port(pkt.tcp->src_port);
    pkt.tcp->dst_port = next_port(pkt.tcp->dst_port);
    return true;
  }
  if (pkt.udp) {
    pkt.udp->src_port = next_port(pkt.udp->src_port);
    pkt.udp->dst_port = next_port(pkt.udp->dst_port);
    return true;
  }
  return false;
}

bool do_seq_ack(ParsedPacket& pkt, TransformMode mode, std::uint64_t seed,
                std::uint64_t flow_uid, Rng& rng) {
  if (!pkt.tcp) return false;
  if (mode == TransformMode::per_packet) {
    pkt.tcp->seq_no = rng.next_u32();
    pkt.tcp->ack_no = rng.next_u32();
  } else {
    // one offset for both directions keeps seq deltas and the seq/ack
    // cross-consistency intact
    const std::uint32_t off =
        static_cast<std::uint32_t>(flow_value(seed, flow_uid, "seqack"));
    pkt.tcp->seq_no += off;
    pkt.tcp->ack_no += off;
  }
  return true;
}

bool do_tcp_timestamp(ParsedPacket& pkt, TransformMode mode, std::uint64_t seed,
                      std::uint64_t flow_uid, Rng& rng) {
  if (!pkt.tcp || !pkt.tcp->ts_present) return false;
  if (mode == TransformMode::per_packet) {
    set_tcp_timestamps(pkt, rng.next_u32(), rng.next_u32());
  } else {
    const std::uint32_t off =
        static_cast<std::uint32_t>(flow_value(seed, flow_uid, "tcpts"));
    set_tcp_timestamps(pkt, pkt.tcp->tsval + off, pkt.tcp->tsecr + off);
  }
  return true;
}

bool do_ttl(ParsedPacket& pkt, TransformMode mode, std::uint64_t seed,
            std::uint64_t flow_uid, Rng& rng) {
  std::uint8_t value;
  if (mode == TransformMode::per_packet) {
    value = static_cast<std::uint8_t>(rng.range(32, 255));
  } else {
    value = static_cast<std::uint8_t>(32 + flow_value(seed, flow_uid, "ttl") % 224);
  }
  if (pkt.ipv4) {
    pkt.ipv4->ttl = value;
    return true;
  }
  if (pkt.ipv6) {
    pkt.ipv6->hop_limit = value;
    return true;
  }
  return false;
}

// Removes the link prefix and the network header; the packet then begins at
// the transport layer.
bool do_strip_ip_header(ParsedPacket& pkt) {
  if (pkt.net_kind() == NetKind::none) return false;
  const std::size_t shift = pkt.transport_offset;
  std::vector<std::uint8_t> bytes(pkt.raw.bytes.begin() + static_cast<std::ptrdiff_t>(shift),
                                  pkt.raw.bytes.end());
  pkt.raw.bytes = std::move(bytes);
  pkt.raw.orig_len = static_cast<std::uint32_t>(pkt.raw.bytes.size());
  pkt.link = LinkKind::none;
  pkt.vlan_tags.clear();
  pkt.ipv4.reset();
  pkt.ipv6.reset();
  pkt.net_offset = 0;
  pkt.transport_offset = 0;
  pkt.payload_offset -= shift;
  return true;
}

bool do_strip_transport_header(ParsedPacket& pkt) {
  if (pkt.transport_kind() == TransportKind::none) return false;
  const std::size_t hdr_len = pkt.payload_offset - pkt.transport_offset;
  std::vector<std::uint8_t> bytes;
  bytes.reserve(pkt.raw.bytes.size() - hdr_len);
  bytes.insert(bytes.end(), pkt.raw.bytes.begin(),
               pkt.raw.bytes.begin() + static_cast<std::ptrdiff_t>(pkt.transport_offset));
  bytes.insert(bytes.end(),
               pkt.raw.bytes.begin() + static_cast<std::ptrdiff_t>(pkt.payload_offset),
               pkt.raw.bytes.end());
  pkt.raw.bytes = std::move(bytes);
  pkt.raw.orig_len = static_cast<std::uint32_t>(pkt.raw.bytes.size());
  pkt.tcp.reset();
  pkt.udp.reset();
  pkt.icmp.reset();
  if (pkt.ipv4 && pkt.ipv4->total_length >= hdr_len) {
    pkt.ipv4->total_length -= static_cast<std::uint16_t>(hdr_len);
  }
  if (pkt.ipv6 && pkt.ipv6->payload_length >= hdr_len) {
    pkt.ipv6->payload_length -= static_cast<std::uint16_t>(hdr_len);
  }
  pkt.payload_offset = pkt.transport_offset;
  // header fields changed; re-emit bytes
  if (pkt.net_kind() != NetKind::none) rebuild(pkt);
  return true;
}

bool do_strip_payload(ParsedPacket& pkt) {
  if (pkt.transport_kind() == TransportKind::none &&
      pkt.net_kind() == NetKind::none) {
    return false;
  }
  pkt.raw.bytes.resize(pkt.payload_offset);
  if (pkt.ipv4) {
    const std::size_t declared = pkt.payload_offset - pkt.net_offset;
    pkt.ipv4->total_length = static_cast<std::uint16_t>(declared);
  }
  if (pkt.ipv6) {
    const std::size_t declared = pkt.payload_offset - (pkt.net_offset + 40);
    pkt.ipv6->payload_length = static_cast<std::uint16_t>(declared);
  }
  if (pkt.udp) pkt.udp->length = 8;
  rebuild(pkt);
  return true;
}

}  // namespace

ParsedPacket apply_transforms(const ParsedPacket& pkt, const TransformSpec& spec,
                              std::uint64_t flow_uid, TransformReport* report) {
  const auto ops = spec.effective_ops();
  auto count = [&](const AtomicTransform& op, bool affected) {
    if (!report) return;
    auto& c = report->counter(transform_kind_name(op.kind));
    if (affected) {
      ++c.affected;
    } else {
      ++c.skipped;
    }
  };

  if (pkt.malformed != MalformKind::none) {
    for (const auto& op : ops) count(op, false);
    return pkt;
  }

  ParsedPacket out = pkt;
  Rng rng(derive_seed(spec.seed, "transform.pkt", pkt.raw.uid));
  bool dirty = false;
  for (const auto& op : ops) {
    bool affected = false;
    switch (op.kind) {
      case TransformKind::randomize_ip:
        affected = do_randomize_ip(out, op.mode, spec.seed, flow_uid, rng);
        break;
      case TransformKind::zero_ip_addrs:
        affected = do_zero_ip_addrs(out);
        break;
      case TransformKind::zero_ports:
        affected = do_ports(out, false, op.mode, spec.seed, flow_uid, rng);
        break;
      case TransformKind::randomize_ports:
        affected = do_ports(out, true, op.mode, spec.seed, flow_uid, rng);
        break;
      case TransformKind::randomize_seq_ack:
        affected = do_seq_ack(out, op.mode, spec.seed, flow_uid, rng);
        break;
      case TransformKind::randomize_tcp_timestamp:
        affected = do_tcp_timestamp(out, op.mode, spec.seed, flow_uid, rng);
        break;
      case TransformKind::randomize_ttl:
        affected = do_ttl(out, op.mode, spec.seed, flow_uid, rng);
        break;
      case TransformKind::strip_ip_header:
        affected = do_strip_ip_header(out);
        break;
      case TransformKind::strip_transport_header:
        affected = do_strip_transport_header(out);
        break;
      case TransformKind::strip_payload:
        affected = do_strip_payload(out);
        break;
      case TransformKind::recompute_checksums:
        set_checksums_valid(out);
        affected = true;
        dirty = false;
        break;
    }
    if (affected && op.kind != TransformKind::recompute_checksums) dirty = true;
    count(op, affected);
  }
  if (dirty) rebuild(out);
  return out;
}

}  // namespace trafficbench
