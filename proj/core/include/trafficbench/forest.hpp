#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace trafficbench {

using Matrix = std::vector<std::vector<double>>;

struct ForestParams {
  int n_trees = 100;
  int max_depth = -1;          // -1 = unlimited
  int min_samples_split = 2;
  int features_per_split = 0;  // 0 = sqrt(width), -1 = all
  bool bootstrap = true;
  int n_threads = 1;

  static ForestParams from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

struct TreeNode {
  int feature = -1;  // -1 = leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<std::uint32_t> histogram;  // leaves only
};

struct Tree {
  std::vector<TreeNode> nodes;  // node 0 is the root

  int leaf_for(const std::vector<double>& x) const;
};

struct ForestModel {
  ForestParams params;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;
  std::vector<std::string> feature_names;
  std::uint64_t schema_fingerprint = 0;
  std::vector<Tree> trees;

  std::size_t width() const { return feature_names.size(); }

  nlohmann::ordered_json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static ForestModel load(const std::string& path);
};

std::uint64_t schema_fingerprint(const std::vector<std::string>& names);

/// CART forest on bootstrap samples, Gini impurity, midpoint thresholds
/// (x <= t goes left). Zero-gain splits are accepted; constant features do
/// not count against features_per_split, so a valid split is found whenever
/// one exists. Split ties break on lower feature index, then lower threshold.
/// Deterministic given seed (per-tree seeds derive from it), regardless of
/// n_threads.
ForestModel train_forest(const Matrix& X, const std::vector<int>& y,
                         const std::vector<std::string>& classes,
                         const ForestParams& params, std::uint64_t seed);

/// Majority vote over trees; vote ties break by mean probability, then lowest
/// class index. Width mismatch throws ValidationError.
std::vector<int> predict(const ForestModel& model, const Matrix& X);

/// Rows sum to 1: mean of normalized leaf histograms over trees.
Matrix predict_proba(const ForestModel& model, const Matrix& X);

/// Mean decrease in impurity: per-tree importances are normalized, averaged
/// over trees, and renormalized. All zeros when no tree ever split.
std::vector<double> feature_importance(const ForestModel& model);

}  // namespace trafficbench
