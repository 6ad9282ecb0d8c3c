#include "trafficbench/flow.hpp"

#include <fstream>
#include <tuple>

#include "trafficbench/errors.hpp"
#include "trafficbench/log.hpp"

namespace trafficbench {

FlowKey flow_key(const ParsedPacket& pkt) {
  FlowKey key;
  if (pkt.net_kind() == NetKind::none) {
    key.degenerate = true;
    key.degenerate_uid = pkt.raw.uid;
    return key;
  }
  std::array<std::uint8_t, 16> src{};
  std::array<std::uint8_t, 16> dst{};
  if (pkt.ipv4) {
    std::copy(pkt.ipv4->src.begin(), pkt.ipv4->src.end(), src.begin());
    std::copy(pkt.ipv4->dst.begin(), pkt.ipv4->dst.end(), dst.begin());
    key.proto = pkt.ipv4->protocol;
  } else {
    src = pkt.ipv6->src;
    dst = pkt.ipv6->dst;
    key.proto = pkt.ipv6->final_next_header;
    key.v6 = true;
  }
  std::uint16_t sport = 0, dport = 0;
  if (pkt.tcp) {
    sport = pkt.tcp->src_port;
    dport = pkt.tcp->dst_port;
  } else if (pkt.udp) {
    sport = pkt.udp->src_port;
    dport = pkt.udp->dst_port;
  }
  if (std::tie(src, sport) <= std::tie(dst, dport)) {
    key.addr_lo = src;
    key.port_lo = sport;
    key.addr_hi = dst;
    key.port_hi = dport;
  } else {
    key.addr_lo = dst;
    key.port_lo = dport;
    key.addr_hi = src;
    key.port_hi = sport;
  }
  return key;
}

namespace {

std::string addr_string(const std::array<std::uint8_t, 16>& a, bool v6) {
  std::string s;
  if (!v6) {
    for (int i = 0; i < 4; ++i) {
      if (i) s += '.';
      s += std::to_string(a[i]);
    }
    return s;
  }
  static const char* hex = "0123456789abcdef";
  for (int i = 0; i < 16; i += 2) {
    if (i) s += ':';
    s += hex[a[i] >> 4];
    s += hex[a[i] & 0xF];
    s += hex[a[i + 1] >> 4];
    s += hex[a[i + 1] & 0xF];
  }
  return s;
}

}  // namespace

std::string flow_key_string(const FlowKey& key) {
  if (key.degenerate) {
    return "pkt|" + std::to_string(key.degenerate_uid);
  }
  return std::to_string(key.proto) + "|" + addr_string(key.addr_lo, key.v6) + "|" +
         std::to_string(key.port_lo) + "|" + addr_string(key.addr_hi, key.v6) + "|" +
         std::to_string(key.port_hi);
}

LabelMap LabelMap::from_json(const nlohmann::json& j) {
  LabelMap m;
  for (const auto& [k, v] : j.items()) {
    if (k != "flows" && k != "traces" && k != "uids" && k != "default") {
      throw ValidationError("label map does not recognize this field, offending key: " + k);
    }
  }
  if (j.contains("flows")) {
    for (const auto& [k, v] : j.at("flows").items()) m.by_flow[k] = v.get<std::string>();
  }
  if (j.contains("traces")) {
    for (const auto& [k, v] : j.at("traces").items()) m.by_trace[k] = v.get<std::string>();
  }
  if (j.contains("uids")) {
    for (const auto& [k, v] : j.at("uids").items()) {
      m.by_uid[std::stoull(k)] = v.get<std::string>();
    }
  }
  if (j.contains("default")) m.default_label = j.at("default").get<std::string>();
  return m;
}

LabelMap LabelMap::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open label map: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("label map '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

nlohmann::ordered_json LabelMap::to_json() const {
  nlohmann::ordered_json j;
  if (!by_flow.empty()) j["flows"] = by_flow;
  if (!by_trace.empty()) j["traces"] = by_trace;
  if (!by_uid.empty()) {
    nlohmann::ordered_json u;
    for (const auto& [k, v] : by_uid) u[std::to_string(k)] = v;
    j["uids"] = u;
  }
  if (default_label) j["default"] = *default_label;
  return j;
}

std::optional<std::string> LabelMap::lookup(const std::string& flow_key_str,
                                            const std::string& trace_id,
                                            std::uint64_t uid) const {
  if (auto it = by_flow.find(flow_key_str); it != by_flow.end()) return it->second;
  if (auto it = by_uid.find(uid); it != by_uid.end()) return it->second;
  if (auto it = by_trace.find(trace_id); it != by_trace.end()) return it->second;
  return default_label;
}

std::vector<FlowRecord> assemble_flows(const std::vector<ParsedPacket>& packets,
                                       const LabelMap& labels) {
  // flows are scoped per trace file: the same 5-tuple in two traces is two flows
  std::map<std::pair<std::string, FlowKey>, std::size_t> index;
  std::vector<FlowRecord> flows;
  std::size_t degenerate_count = 0;
  for (const auto& pkt : packets) {
    const FlowKey key = flow_key(pkt);
    auto [it, inserted] = index.try_emplace({pkt.raw.trace_id, key}, flows.size());
    if (inserted) {
      FlowRecord rec;
      rec.flow_uid = flows.size();
      rec.key = key;
      rec.trace_id = pkt.raw.trace_id;
      rec.degenerate = key.degenerate;
      const auto label = labels.lookup(flow_key_string(key), pkt.raw.trace_id, pkt.raw.uid);
      if (!label) {
        throw ValidationError("no label for flow " + flow_key_string(key) + " in trace '" +
                              pkt.raw.trace_id + "'");
      }
      rec.label = *label;
      flows.push_back(std::move(rec));
      if (key.degenerate) ++degenerate_count;
    }
    flows[it->second].packet_uids.push_back(pkt.raw.uid);
  }
  if (degenerate_count > 0) {
    log_warn(std::to_string(degenerate_count) +
             " packet(s) without a network layer were assigned singleton flows");
  }
  return flows;
}

}  // namespace trafficbench
