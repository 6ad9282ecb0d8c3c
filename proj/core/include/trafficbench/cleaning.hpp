#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trafficbench/packet.hpp"

namespace trafficbench {

/// (transport, port) -> application tag. Classification is a port + header
/// heuristic: enough for the default filter vocabulary, never deep dissection.
struct PortTable {
  std::map<std::pair<char, std::uint16_t>, std::string> entries;  // 't'/'u' + port

  static PortTable defaults();
  const std::string* lookup(char transport, std::uint16_t port) const;
};

struct FilterSet {
  std::map<std::string, std::vector<std::string>> groups;
  std::set<std::string> enabled_groups;
  // Prior-work reproduction knob, off by default: drop packets smaller than
  // this many bytes.
  std::size_t min_packet_bytes = 0;

  /// Full default group list, all groups enabled.
  static FilterSet defaults();
  static FilterSet from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;

  /// group containing the tag, or nullptr. Validates the one-group-per-tag
  /// invariant at construction.
  const std::string* group_of(const std::string& tag) const;

 private:
  mutable std::map<std::string, std::string> tag_to_group_;
  void index() const;
};

struct CleaningReport {
  std::uint64_t total = 0;
  std::uint64_t kept = 0;
  std::map<std::string, std::uint64_t> removed_by_group;
  std::map<std::string, std::uint64_t> removed_by_protocol;

  nlohmann::ordered_json to_json() const;
};

/// Most-specific tag derivable from headers and well-known ports; falls back
/// to "tcp"/"udp"/"unknown". Port 443 over TCP is tagged "tls".
std::string classify_protocol(const ParsedPacket& pkt, const PortTable& ports);

/// Removes packets whose tag belongs to an enabled group; preserves order,
/// fills protocol_tag on every packet it examines.
std::pair<std::vector<ParsedPacket>, CleaningReport> apply_filters(
    std::vector<ParsedPacket> packets, const FilterSet& filters,
    const PortTable& ports = PortTable::defaults());

}  // namespace trafficbench
