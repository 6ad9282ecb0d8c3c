#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trafficbench/cleaning.hpp"
#include "trafficbench/dataset.hpp"
#include "trafficbench/features.hpp"
#include "trafficbench/forest.hpp"
#include "trafficbench/metrics.hpp"
#include "trafficbench/transforms.hpp"

namespace trafficbench {

struct SamplingSpec {
  std::size_t flow_cap = 0;           // 0 = no cap
  bool balance = false;               // undersample to the minority class
  double fraction = 1.0;              // stratified keep fraction
  std::size_t min_class_support = 0;  // drop classes with fewer units

  static SamplingSpec from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct RunConfig {
  std::vector<std::string> inputs;  // pcap paths
  std::string labels_path;
  bool clean = true;
  FilterSet filters = FilterSet::defaults();
  std::string policy = "per-flow";  // or "per-packet"
  std::string ratios = "7:1";
  int folds = 0;  // 0 = no k-fold assignment
  std::uint64_t seed = 1;
  SamplingSpec sampling;
  std::vector<TransformSpec> transforms;
  std::vector<std::string> drop_features;
  ForestParams model;
  std::size_t knn_k = 0;        // 0 = skip the k-NN baseline
  std::size_t vote_first_n = 0;  // 0 = skip flow-level majority voting
  int threads = 1;
  std::string out_dir = ".";

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  nlohmann::ordered_json to_json() const;
  std::uint64_t hash() const;
};

struct RunReport {
  std::string tool_version;
  std::uint64_t config_hash = 0;
  nlohmann::ordered_json cleaning;
  nlohmann::ordered_json sampling;
  nlohmann::ordered_json transform_counts;
  std::vector<EvalResult> fold_results;
  double fold_accuracy_mean = 0.0;
  double fold_accuracy_std = 0.0;
  double fold_macro_f1_mean = 0.0;
  double fold_macro_f1_std = 0.0;
  std::optional<EvalResult> val_result;
  std::optional<EvalResult> test_result;
  std::optional<EvalResult> knn_result;
  std::optional<EvalResult> vote_result;
  std::vector<std::string> feature_names;
  std::vector<double> importance;

  nlohmann::ordered_json to_json() const;
};

/// clean -> flows -> split -> sample -> transform -> featurize -> train ->
/// eval. Writes manifest.jsonl, features.csv, model.json, and report.json
/// under config.out_dir.
RunReport run_pipeline(const RunConfig& config);

/// Scope-filtered transform pass: every manifest row's packet runs through
/// each spec whose scope covers the row's partition. Packets without a
/// manifest row pass through unchanged.
std::vector<ParsedPacket> apply_transform_stage(const std::vector<ParsedPacket>& packets,
                                                const DatasetManifest& manifest,
                                                const std::vector<TransformSpec>& specs,
                                                TransformReport* report = nullptr);

/// Numeric views of a feature table restricted to a partition (and, when
/// fold >= 0, to rows of / excluding that fold).
struct LabeledMatrix {
  Matrix x;
  std::vector<int> y;
  std::vector<std::uint64_t> packet_uids;
  std::vector<std::uint64_t> flow_uids;
};

std::vector<std::string> class_list(const FeatureTable& table);
LabeledMatrix matrix_of(const FeatureTable& table, const std::vector<std::string>& classes,
                        Partition partition, int fold = -1, bool exclude_fold = false);

}  // namespace trafficbench
