#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trafficbench/pcap.hpp"

namespace trafficbench {

enum class ClassSignal { none, server_ip_per_class, payload_length_per_class };

const char* class_signal_name(ClassSignal s);
ClassSignal class_signal_from(const std::string& name);

struct SynthSpec {
  std::size_t n_classes = 2;
  std::size_t flows_per_class = 10;
  std::size_t packets_per_flow = 10;  // fixed length when geometric_mean == 0
  double geometric_mean = 0.0;        // > 0: geometric flow lengths
  std::size_t packets_cap = 0;        // 0 = uncapped
  ClassSignal signal = ClassSignal::none;
  std::uint64_t seed = 1;
  std::map<std::string, std::size_t> extraneous;  // tag -> packet count

  static SynthSpec from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct SynthResult {
  std::vector<RawPacket> packets;       // time-ordered, uids 0..n-1
  nlohmann::ordered_json labels;        // label-map json (flows -> class)
  std::map<std::string, std::size_t> extraneous_written;
};

/// Deterministic TCP flows with realistic structure: per-direction random
/// ISNs, seq/ack progression matching payload sizes, timestamp options with
/// per-flow bases, valid checksums. With signal none, no header or payload
/// field correlates with the class except through flow membership; the other
/// signals plant an explicit server-address or payload-length cue. Supported
/// extraneous tags: arp, mdns, ntp.
SynthResult generate_trace(const SynthSpec& spec);

/// Writes <dir>/synth.pcap and <dir>/labels.json.
void write_synth(const SynthResult& result, const std::string& dir);

}  // namespace trafficbench
