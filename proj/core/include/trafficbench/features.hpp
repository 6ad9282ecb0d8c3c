#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trafficbench/dataset.hpp"
#include "trafficbench/packet.hpp"

namespace trafficbench {

/// One column of the fixed header-feature layout.
enum class FeatureId {
  ipv4_present,
  ipv4_src_octet,  // + octet index 0..3
  ipv4_dst_octet,
  ipv4_tos,
  ipv4_ihl,
  ipv4_id,
  ipv4_checksum,
  ipv4_flags,
  ipv4_length,
  ipv4_protocol,
  ipv4_version,
  ipv4_ttl,
  ipv4_frag,
  ipv6_present,
  ipv6_src_octet,  // + octet index 0..15
  ipv6_dst_octet,
  ipv6_flow_label,
  ipv6_version,
  ipv6_payload_length,
  ipv6_hop_limit,
  ipv6_traffic_class,
  ipv6_next_header,
  udp_present,
  udp_sport,
  udp_dport,
  udp_checksum,
  udp_length,
  tcp_present,
  tcp_sport,
  tcp_dport,
  tcp_tsval,
  tcp_tsecr,
  tcp_window,
  tcp_urgent,
  tcp_data_offset,
  tcp_flags,
  tcp_checksum,
  tcp_seq,
  tcp_ack,
  tcp_opts,
};

struct FeatureField {
  std::string name;
  FeatureId id;
  int octet = 0;  // only used by the address-octet ids
};

struct FeatureSchema {
  std::vector<FeatureField> fields;

  /// Full layout: IPv4 (presence, 8 address octets, ten scalars), IPv6
  /// (presence, 32 address octets, six scalars), UDP, TCP. Missing layers
  /// encode as sentinel 0 plus a 0 presence flag.
  static FeatureSchema defaults();
  static FeatureSchema from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;

  std::size_t width() const { return fields.size(); }
  std::vector<std::string> names() const;
  std::optional<std::size_t> index_of(const std::string& name) const;

  /// Copy without the named columns. "ip-octets" expands to every address
  /// octet column. Unknown names throw ValidationError.
  FeatureSchema without(const std::vector<std::string>& drop) const;
};

/// Splits "a,b,c" and expands the "ip-octets" alias against the schema.
std::vector<std::string> expand_feature_names(const FeatureSchema& schema,
                                              const std::string& csv_list);

/// Deterministic and total over decoded packets; malformed layers read as
/// absent.
std::vector<double> extract_features(const ParsedPacket& pkt, const FeatureSchema& schema);

struct FeatureRecord {
  std::uint64_t packet_uid = 0;
  std::uint64_t flow_uid = 0;
  std::string label;
  Partition partition = Partition::train;
  int fold = -1;
  std::vector<double> values;
};

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<FeatureRecord> rows;

  std::size_t width() const { return names.size(); }

  /// Copy without the named columns (names follow expand_feature_names).
  FeatureTable drop(const std::vector<std::string>& drop_names) const;

  /// Header = feature names + packet_uid, flow_uid, label, partition, fold.
  void write_csv(std::ostream& out) const;
  void write_file(const std::string& path) const;
  static FeatureTable read_csv(std::istream& in);
  static FeatureTable read_file(const std::string& path);
};

/// Joins manifest rows (in manifest order) with the decoded packets by uid.
/// A manifest uid with no packet throws ValidationError naming the key.
FeatureTable build_feature_table(const std::vector<ParsedPacket>& packets,
                                 const DatasetManifest& manifest,
                                 const FeatureSchema& schema);

}  // namespace trafficbench
