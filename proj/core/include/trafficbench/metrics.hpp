#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace trafficbench {

struct PerClassScore {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<PerClassScore> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [true][pred]
  std::vector<std::string> classes;

  nlohmann::ordered_json to_json() const;
};

/// Fraction of exact matches. Lengths must agree and be >= 1.
double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred);

/// Unweighted mean of per-class F1 over all n_classes; a class never seen in
/// y_true contributes F1 = 0.
double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                std::size_t n_classes);

EvalResult evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                    const std::vector<std::string>& classes);

/// Most frequent label; ties break by highest summed probability, then lowest
/// class index. probas may be empty (pure plurality) or one row per vote.
int flow_majority_vote(const std::vector<int>& votes,
                       const std::vector<std::vector<double>>& probas,
                       std::size_t n_classes);

}  // namespace trafficbench
