#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trafficbench/flow.hpp"

namespace trafficbench {

enum class Partition { train, val, test };

const char* partition_name(Partition p);
Partition partition_from(const std::string& name);

struct ManifestRow {
  std::uint64_t packet_uid = 0;
  std::uint64_t flow_uid = 0;
  std::string label;
  Partition partition = Partition::train;
  int fold = -1;  // -1 = unassigned
};

struct DatasetManifest {
  std::string split_policy;  // "per-flow" | "per-packet"
  std::uint64_t seed = 0;
  std::string ratios;  // as given, e.g. "7:1" or "8:1:1"
  std::vector<ManifestRow> rows;

  /// JSON Lines: one header object, then one object per packet.
  void write(std::ostream& out) const;
  static DatasetManifest read(std::istream& in);
  void write_file(const std::string& path) const;
  static DatasetManifest read_file(const std::string& path);
};

struct SamplingReport {
  std::vector<nlohmann::ordered_json> steps;
  nlohmann::ordered_json to_json() const;
};

/// "A:B" or "A:B:C" normalized to shares. Two-way ratios map to train:test
/// (validation comes from K-fold over train); three-way to train:val:test.
std::vector<double> parse_ratios(const std::string& ratios, std::size_t* n_parts = nullptr);

/// Largest-remainder apportionment of n units over normalized shares; the
/// result sums to n exactly. Fraction ties favor the lower index.
std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& shares);

/// Seeded, class-stratified flow assignment. Flow counts per partition follow
/// largest-remainder rounding per class; within a class, flows are assigned
/// in descending size so long flows spread evenly across partitions in packet
/// terms. Every packet inherits its flow's partition. A class with fewer
/// flows than partitions goes entirely to train, with a warning.
DatasetManifest split_per_flow(const std::vector<FlowRecord>& flows,
                               const std::string& ratios, std::uint64_t seed);

/// Seeded per-class random assignment of individual packets, ignoring flow
/// identity. Deliberately leaky; reproduces prior-work pipelines.
DatasetManifest split_per_packet(const std::vector<FlowRecord>& flows,
                                 const std::string& ratios, std::uint64_t seed);

/// Uniform order-preserving subset of size cap when the flow is longer.
FlowRecord cap_long_flow(const FlowRecord& flow, std::size_t cap, std::uint64_t seed);

/// Applies cap_long_flow to every flow; removed packets are itemized.
std::vector<FlowRecord> cap_long_flows(const std::vector<FlowRecord>& flows,
                                       std::size_t cap, std::uint64_t seed,
                                       SamplingReport* report = nullptr);

/// Downsamples every class to the minority class size among non-test rows,
/// measured in the policy's unit (whole flows under per-flow, packets under
/// per-packet). Test rows are never touched.
void balance_undersample(DatasetManifest& manifest, std::uint64_t seed,
                         SamplingReport* report = nullptr);

/// Per-class proportional seeded sampling; class shares preserved within one
/// sample. fraction must be in (0, 1].
void stratified_sample(DatasetManifest& manifest, double fraction, std::uint64_t seed,
                       SamplingReport* report = nullptr);

/// Class-stratified folds over train-partition rows at the policy's unit
/// granularity; fold sizes within one unit per class.
void kfold(DatasetManifest& manifest, int k, std::uint64_t seed);

/// Prior-work reproduction knob, unused by default: drop classes with fewer
/// than min_units units (policy granularity) from the manifest.
void filter_min_class_support(DatasetManifest& manifest, std::size_t min_units,
                              SamplingReport* report = nullptr);

}  // namespace trafficbench
