#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trafficbench/packet.hpp"

namespace trafficbench {

/// Canonical bidirectional 5-tuple: the (address, port) endpoint pairs are
/// ordered so both directions of a connection map to the same key.
struct FlowKey {
  bool v6 = false;
  std::uint8_t proto = 0;  // ip protocol number
  std::array<std::uint8_t, 16> addr_lo{};
  std::array<std::uint8_t, 16> addr_hi{};
  std::uint16_t port_lo = 0;
  std::uint16_t port_hi = 0;
  bool degenerate = false;        // packet had no usable network layer
  std::uint64_t degenerate_uid = 0;

  auto operator<=>(const FlowKey&) const = default;
};

/// Key for a decoded packet; degenerate (per-packet singleton) when the
/// packet has no network layer.
FlowKey flow_key(const ParsedPacket& pkt);

/// "proto|addr|port|addr|port" with dotted IPv4 / hex IPv6 text; degenerate
/// keys render as "pkt|<uid>". This is the string used in label maps.
std::string flow_key_string(const FlowKey& key);

struct LabelMap {
  std::map<std::string, std::string> by_flow;   // flow_key_string -> label
  std::map<std::string, std::string> by_trace;  // trace_id -> label
  std::map<std::uint64_t, std::string> by_uid;  // packet uid -> label
  std::optional<std::string> default_label;

  static LabelMap from_json(const nlohmann::json& j);
  static LabelMap from_file(const std::string& path);
  nlohmann::ordered_json to_json() const;

  /// Precedence: flow key, then packet uid, then trace, then default.
  std::optional<std::string> lookup(const std::string& flow_key_str,
                                    const std::string& trace_id,
                                    std::uint64_t uid) const;
};

struct FlowRecord {
  std::uint64_t flow_uid = 0;
  FlowKey key;
  std::vector<std::uint64_t> packet_uids;  // capture order
  std::string label;
  std::string trace_id;
  bool degenerate = false;
};

/// One FlowRecord per distinct (trace_id, FlowKey); packets without a usable
/// network layer become flagged singleton flows. Throws ValidationError when
/// a packet has no label under the map's precedence rules.
std::vector<FlowRecord> assemble_flows(const std::vector<ParsedPacket>& packets,
                                       const LabelMap& labels);

}  // namespace trafficbench
