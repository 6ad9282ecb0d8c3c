#include "trafficbench/knn.hpp"

#include <algorithm>

#include "trafficbench/errors.hpp"
#include "trafficbench/log.hpp"

namespace trafficbench {

std::vector<int> knn_classify(const Matrix& train_x, const std::vector<int>& train_y,
                              const Matrix& queries, std::size_t k, std::size_t n_classes) {
  if (train_x.empty() || train_x.size() != train_y.size()) {
    throw ValidationError("training data and labels must be nonempty and aligned");
  }
  if (k < 1) throw ValidationError("k must be >= 1");
  if (k > train_x.size()) {
    log_warn("k=" + std::to_string(k) + " exceeds the training size, clamping to " +
             std::to_string(train_x.size()));
    k = train_x.size();
  }
  const std::size_t width = train_x[0].size();
  for (const auto& row : train_x) {
    if (row.size() != width) throw ValidationError("ragged training matrix");
  }

  std::vector<int> out;
  out.reserve(queries.size());
  std::vector<std::pair<double, std::size_t>> dist(train_x.size());
  std::vector<std::size_t> counts(n_classes);
  for (const auto& q : queries) {
    if (q.size() != width) throw ValidationError("query width mismatch");
    for (std::size_t i = 0; i < train_x.size(); ++i) {
      double d2 = 0.0;
      for (std::size_t f = 0; f < width; ++f) {
        const double d = q[f] - train_x[i][f];
        d2 += d * d;
      }
      dist[i] = {d2, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      const int label = train_y[dist[i].second];
      if (label < 0 || static_cast<std::size_t>(label) >= n_classes) {
        throw ValidationError("label index out of range");
      }
      ++counts[static_cast<std::size_t>(label)];
    }
    std::size_t top = 0;
    for (std::size_t c = 0; c < n_classes; ++c) top = std::max(top, counts[c]);
    // first neighbor whose class reaches the top count wins the tie
    int winner = -1;
    for (std::size_t i = 0; i < k && winner < 0; ++i) {
      const int label = train_y[dist[i].second];
      if (counts[static_cast<std::size_t>(label)] == top) winner = label;
    }
    out.push_back(winner);
  }
  return out;
}

}  // namespace trafficbench
