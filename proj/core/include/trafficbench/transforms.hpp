#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trafficbench/packet.hpp"

namespace trafficbench {

enum class TransformKind {
  randomize_ip,
  zero_ip_addrs,
  zero_ports,
  randomize_ports,
  randomize_seq_ack,
  randomize_tcp_timestamp,
  randomize_ttl,
  strip_ip_header,
  strip_transport_header,
  strip_payload,
  recompute_checksums,
};

enum class TransformMode { per_packet, per_flow_consistent };
enum class TransformScope { train_only, test_only, both };

const char* transform_kind_name(TransformKind k);
TransformKind transform_kind_from(const std::string& name);
const char* transform_scope_name(TransformScope s);
TransformScope transform_scope_from(const std::string& name);

struct AtomicTransform {
  TransformKind kind;
  TransformMode mode = TransformMode::per_packet;
};

struct TransformSpec {
  std::vector<AtomicTransform> ops;
  TransformScope scope = TransformScope::both;
  std::uint64_t seed = 0;
  // Mutated fields would otherwise leave an invalid-checksum fingerprint, so
  // a recompute step is appended automatically when any op mutates bytes.
  bool auto_recompute = true;

  /// Named presets: "etbert", "yatc", "trafficformer", "table5",
  /// "table6-no-ip", "table6-no-header", "table6-no-payload",
  /// "anonymize-explicit-ids".
  static TransformSpec preset(const std::string& name, TransformScope scope,
                              std::uint64_t seed);
  static TransformSpec from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;

  /// Validates op ordering (recompute_checksums, if listed, must be last) and
  /// returns the effective op list with the automatic recompute appended.
  std::vector<AtomicTransform> effective_ops() const;
};

struct TransformCounter {
  std::string name;
  std::uint64_t affected = 0;
  std::uint64_t skipped = 0;
};

struct TransformReport {
  std::vector<TransformCounter> per_op;

  TransformCounter& counter(const std::string& name);
  nlohmann::ordered_json to_json() const;
};

/// Applies the spec's ops in order. Per-packet modes draw independent values
/// per packet; per-flow-consistent modes derive values from (seed, flow_uid)
/// so intra-flow structure is preserved. Ops whose field is absent are
/// skipped and counted. Malformed packets are returned untouched with every
/// op counted as skipped. Scope filtering is the caller's concern.
ParsedPacket apply_transforms(const ParsedPacket& pkt, const TransformSpec& spec,
                              std::uint64_t flow_uid, TransformReport* report = nullptr);

}  // namespace trafficbench
