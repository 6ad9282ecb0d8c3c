#include "trafficbench/metrics.hpp"

#include <algorithm>

#include "trafficbench/errors.hpp"

namespace trafficbench {

namespace {

void check_aligned(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.empty() || y_true.size() != y_pred.size()) {
    throw ValidationError("prediction and truth vectors must be nonempty and aligned");
  }
}

std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& y_true,
                                                       const std::vector<int>& y_pred,
                                                       std::size_t n_classes) {
  std::vector<std::vector<std::size_t>> m(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if (t < 0 || static_cast<std::size_t>(t) >= n_classes || p < 0 ||
        static_cast<std::size_t>(p) >= n_classes) {
      throw ValidationError("label index out of range");
    }
    ++m[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

}  // namespace

double accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  check_aligned(y_true, y_pred);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == y_pred[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

double macro_f1(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                std::size_t n_classes) {
  check_aligned(y_true, y_pred);
  if (n_classes == 0) throw ValidationError("macro_f1 needs at least one class");
  const auto m = confusion_matrix(y_true, y_pred, n_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t j = 0; j < n_classes; ++j) {
      row += m[c][j];
      col += m[j][c];
    }
    const double tp = static_cast<double>(m[c][c]);
    const double precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    const double recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    sum += f1;
  }
  return sum / static_cast<double>(n_classes);
}

EvalResult evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                    const std::vector<std::string>& classes) {
  check_aligned(y_true, y_pred);
  if (classes.empty()) throw ValidationError("class list is empty");
  EvalResult result;
  result.classes = classes;
  result.confusion = confusion_matrix(y_true, y_pred, classes.size());
  std::size_t diag = 0;
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t j = 0; j < classes.size(); ++j) {
      row += result.confusion[c][j];
      col += result.confusion[j][c];
    }
    diag += result.confusion[c][c];
    PerClassScore score;
    score.label = classes[c];
    score.support = row;
    const double tp = static_cast<double>(result.confusion[c][c]);
    score.precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    score.recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    score.f1 = score.precision + score.recall > 0.0
                   ? 2.0 * score.precision * score.recall / (score.precision + score.recall)
                   : 0.0;
    f1_sum += score.f1;
    result.per_class.push_back(std::move(score));
  }
  result.accuracy = static_cast<double>(diag) / static_cast<double>(y_true.size());
  result.macro_f1 = f1_sum / static_cast<double>(classes.size());
  return result;
}

nlohmann::ordered_json EvalResult::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["macro_f1"] = macro_f1;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& score : per_class) {
    nlohmann::ordered_json s;
    s["label"] = score.label;
    s["precision"] = score.precision;
    s["recall"] = score.recall;
    s["f1"] = score.f1;
    s["support"] = score.support;
    per.push_back(std::move(s));
  }
  j["per_class"] = std::move(per);
  j["classes"] = classes;
  j["confusion"] = confusion;
  return j;
}

int flow_majority_vote(const std::vector<int>& votes,
                       const std::vector<std::vector<double>>& probas,
                       std::size_t n_classes) {
  if (votes.empty()) throw ValidationError("majority vote needs at least one prediction");
  if (!probas.empty() && probas.size() != votes.size()) {
    throw ValidationError("probability rows must align with votes");
  }
  std::vector<std::size_t> counts(n_classes, 0);
  std::vector<double> proba_sum(n_classes, 0.0);
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const int v = votes[i];
    if (v < 0 || static_cast<std::size_t>(v) >= n_classes) {
      throw ValidationError("label index out of range");
    }
    ++counts[static_cast<std::size_t>(v)];
    if (!probas.empty()) {
      for (std::size_t c = 0; c < n_classes && c < probas[i].size(); ++c) {
        proba_sum[c] += probas[i][c];
      }
    }
  }
  int best = 0;
  for (std::size_t c = 1; c < n_classes; ++c) {
    const std::size_t b = static_cast<std::size_t>(best);
    if (counts[c] > counts[b] || (counts[c] == counts[b] && proba_sum[c] > proba_sum[b])) {
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace trafficbench
