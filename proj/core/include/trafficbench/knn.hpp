#pragma once

#include <cstddef>
#include <vector>

#include "trafficbench/forest.hpp"  // Matrix

namespace trafficbench {

/// Euclidean k-NN plurality. Distance ties order by training index; class
/// ties resolve to the tied class with the nearest neighbor. k > |train|
/// clamps with a warning.
std::vector<int> knn_classify(const Matrix& train_x, const std::vector<int>& train_y,
                              const Matrix& queries, std::size_t k, std::size_t n_classes);

}  // namespace trafficbench
