#include "trafficbench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "trafficbench/errors.hpp"
#include "trafficbench/rng.hpp"

namespace trafficbench {

ForestParams ForestParams::from_json(const nlohmann::json& j) {
  ForestParams p;
  if (j.contains("n_trees")) p.n_trees = j.at("n_trees").get<int>();
  if (j.contains("max_depth")) p.max_depth = j.at("max_depth").get<int>();
  if (j.contains("min_samples_split")) {
    p.min_samples_split = j.at("min_samples_split").get<int>();
  }
  if (j.contains("features_per_split")) {
    p.features_per_split = j.at("features_per_split").get<int>();
  }
  if (j.contains("bootstrap")) p.bootstrap = j.at("bootstrap").get<bool>();
  if (j.contains("n_threads")) p.n_threads = j.at("n_threads").get<int>();
  if (p.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  if (p.min_samples_split < 2) throw ValidationError("min_samples_split must be >= 2");
  return p;
}

nlohmann::ordered_json ForestParams::to_json() const {
  nlohmann::ordered_json j;
  j["n_trees"] = n_trees;
  j["max_depth"] = max_depth;
  j["min_samples_split"] = min_samples_split;
  j["features_per_split"] = features_per_split;
  j["bootstrap"] = bootstrap;
  return j;
}

int Tree::leaf_for(const std::vector<double>& x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return node;
}

std::uint64_t schema_fingerprint(const std::vector<std::string>& names) {
  std::string joined;
  for (const auto& n : names) {
    joined += n;
    joined += '\n';
  }
  return fnv1a64(joined);
}

namespace {

struct Builder {
  const Matrix& X;
  const std::vector<int>& y;
  int n_classes;
  const ForestParams& params;
  int n_features_per_split;
  Rng rng;
  std::vector<TreeNode> nodes;

  // scratch, reused across nodes
  std::vector<std::size_t> order;
  std::vector<std::uint32_t> left_counts;

  Builder(const Matrix& x, const std::vector<int>& labels, int classes,
          const ForestParams& p, int m, std::uint64_t seed)
      : X(x), y(labels), n_classes(classes), params(p), n_features_per_split(m), rng(seed) {
    left_counts.resize(static_cast<std::size_t>(classes));
  }

  static double gini_from_sq(double sum_sq, double n) {
    return 1.0 - sum_sq / (n * n);
  }

  struct Split {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // weighted child impurity, lower is better
  };

  Split best_split(const std::vector<std::size_t>& idx,
                   const std::vector<std::uint32_t>& counts) {
    Split best;
    const std::size_t n = idx.size();
    std::vector<int> features(X[0].size());
    std::iota(features.begin(), features.end(), 0);
    rng.shuffle(features);

    int informative_seen = 0;
    for (int f : features) {
      if (informative_seen >= n_features_per_split && best.found) break;
      order.assign(idx.begin(), idx.end());
      const std::size_t uf = static_cast<std::size_t>(f);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return X[a][uf] < X[b][uf];
      });
      if (X[order.front()][uf] == X[order.back()][uf]) continue;  // constant here
      ++informative_seen;

      std::fill(left_counts.begin(), left_counts.end(), 0);
      double left_sq = 0.0;
      double right_sq = 0.0;
      for (std::uint32_t c : counts) right_sq += static_cast<double>(c) * c;

      for (std::size_t i = 0; i + 1 < n; ++i) {
        const int cls = y[order[i]];
        const double lc = left_counts[static_cast<std::size_t>(cls)];
        const double rc = counts[static_cast<std::size_t>(cls)] - lc;
        left_sq += 2.0 * lc + 1.0;
        right_sq -= 2.0 * rc - 1.0;
        ++left_counts[static_cast<std::size_t>(cls)];
        const double lo = X[order[i]][uf];
        const double hi = X[order[i + 1]][uf];
        if (lo == hi) continue;
        const double n_l = static_cast<double>(i + 1);
        const double n_r = static_cast<double>(n - i - 1);
        const double score =
            (n_l * gini_from_sq(left_sq, n_l) + n_r * gini_from_sq(right_sq, n_r)) /
            static_cast<double>(n);
        double threshold = lo + (hi - lo) / 2.0;
        // adjacent doubles can round the midpoint onto an endpoint; x <= lo
        // still partitions correctly
        if (!(threshold >= lo && threshold < hi)) threshold = lo;
        const bool better =
            !best.found || score < best.score ||
            (score == best.score &&
             (f < best.feature || (f == best.feature && threshold < best.threshold)));
        if (better) {
          best.found = true;
          best.feature = f;
          best.threshold = threshold;
          best.score = score;
        }
      }
    }
    return best;
  }

  int build(std::vector<std::size_t>&& idx, int depth) {
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i : idx) ++counts[static_cast<std::size_t>(y[i])];
    double sum_sq = 0.0;
    for (std::uint32_t c : counts) sum_sq += static_cast<double>(c) * c;
    const double n = static_cast<double>(idx.size());
    const double node_gini = gini_from_sq(sum_sq, n);

    auto make_leaf = [&]() {
      TreeNode leaf;
      leaf.histogram = std::move(counts);
      nodes.push_back(std::move(leaf));
      return static_cast<int>(nodes.size() - 1);
    };

    const bool depth_stop = params.max_depth >= 0 && depth >= params.max_depth;
    if (node_gini == 0.0 || depth_stop ||
        idx.size() < static_cast<std::size_t>(params.min_samples_split)) {
      return make_leaf();
    }
    const Split split = best_split(idx, counts);
    if (!split.found) return make_leaf();

    std::vector<std::size_t> left_idx;
    std::vector<std::size_t> right_idx;
    const std::size_t uf = static_cast<std::size_t>(split.feature);
    for (std::size_t i : idx) {
      (X[i][uf] <= split.threshold ? left_idx : right_idx).push_back(i);
    }
    if (left_idx.empty() || right_idx.empty()) return make_leaf();
    idx.clear();
    idx.shrink_to_fit();

    nodes.emplace_back();
    const int self = static_cast<int>(nodes.size() - 1);
    nodes[static_cast<std::size_t>(self)].feature = split.feature;
    nodes[static_cast<std::size_t>(self)].threshold = split.threshold;
    const int left = build(std::move(left_idx), depth + 1);
    const int right = build(std::move(right_idx), depth + 1);
    nodes[static_cast<std::size_t>(self)].left = left;
    nodes[static_cast<std::size_t>(self)].right = right;
    return self;
  }
};

Tree train_tree(const Matrix& X, const std::vector<int>& y, int n_classes,
                const ForestParams& params, int m, std::uint64_t seed) {
  Builder b(X, y, n_classes, params, m, seed);
  std::vector<std::size_t> idx;
  idx.reserve(X.size());
  if (params.bootstrap) {
    for (std::size_t i = 0; i < X.size(); ++i) idx.push_back(b.rng.below(X.size()));
  } else {
    idx.resize(X.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  b.build(std::move(idx), 0);
  Tree t;
  t.nodes = std::move(b.nodes);
  return t;
}

std::vector<double> normalized_histogram(const TreeNode& leaf) {
  double total = 0.0;
  for (std::uint32_t c : leaf.histogram) total += c;
  std::vector<double> out(leaf.histogram.size(), 0.0);
  if (total == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = leaf.histogram[i] / total;
  return out;
}

int histogram_argmax(const std::vector<std::uint32_t>& h) {
  int best = 0;
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (h[i] > h[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace

ForestModel train_forest(const Matrix& X, const std::vector<int>& y,
                         const std::vector<std::string>& classes,
                         const ForestParams& params, std::uint64_t seed) {
  if (X.empty() || X.size() != y.size()) {
    throw ValidationError("training data and labels must be nonempty and aligned");
  }
  if (classes.empty()) throw ValidationError("class list is empty");
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes.size()) {
      throw ValidationError("label index out of range");
    }
  }
  const std::size_t width = X[0].size();
  for (const auto& row : X) {
    if (row.size() != width) throw ValidationError("ragged feature matrix");
  }
  if (width == 0) throw ValidationError("feature matrix has zero width");

  int m = params.features_per_split;
  if (m == 0) {
    m = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(width))));
  } else if (m < 0 || static_cast<std::size_t>(m) > width) {
    m = static_cast<int>(width);
  }

  ForestModel model;
  model.params = params;
  model.seed = seed;
  model.classes = classes;
  // Placeholder names record the trained width; callers with a real schema
  // overwrite them before saving.
  model.feature_names.reserve(width);
  for (std::size_t i = 0; i < width; ++i) {
    model.feature_names.push_back("f" + std::to_string(i));
  }
  model.trees.resize(static_cast<std::size_t>(params.n_trees));

  const int threads = std::max(1, params.n_threads);
  auto worker = [&](int first, int step) {
    for (int t = first; t < params.n_trees; t += step) {
      model.trees[static_cast<std::size_t>(t)] =
          train_tree(X, y, static_cast<int>(classes.size()), params, m,
                     derive_seed(seed, "forest.tree", static_cast<std::uint64_t>(t)));
    }
  };
  if (threads == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
    for (auto& th : pool) th.join();
  }
  return model;
}

namespace {

void check_width(const ForestModel& model, const Matrix& X) {
  for (const auto& row : X) {
    if (row.size() != model.width()) {
      throw ValidationError("feature width " + std::to_string(row.size()) +
                            " does not match the model's schema width " +
                            std::to_string(model.width()));
    }
  }
}

}  // namespace

std::vector<int> predict(const ForestModel& model, const Matrix& X) {
  check_width(model, X);
  const std::size_t k = model.classes.size();
  std::vector<int> out;
  out.reserve(X.size());
  std::vector<std::uint32_t> votes(k);
  std::vector<double> proba(k);
  for (const auto& x : X) {
    std::fill(votes.begin(), votes.end(), 0);
    std::fill(proba.begin(), proba.end(), 0.0);
    for (const auto& tree : model.trees) {
      const auto& leaf = tree.nodes[static_cast<std::size_t>(tree.leaf_for(x))];
      ++votes[static_cast<std::size_t>(histogram_argmax(leaf.histogram))];
      const auto p = normalized_histogram(leaf);
      for (std::size_t c = 0; c < k; ++c) proba[c] += p[c];
    }
    int best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (votes[c] > votes[static_cast<std::size_t>(best)] ||
          (votes[c] == votes[static_cast<std::size_t>(best)] &&
           proba[c] > proba[static_cast<std::size_t>(best)])) {
        best = static_cast<int>(c);
      }
    }
    out.push_back(best);
  }
  return out;
}

Matrix predict_proba(const ForestModel& model, const Matrix& X) {
  check_width(model, X);
  const std::size_t k = model.classes.size();
  Matrix out;
  out.reserve(X.size());
  for (const auto& x : X) {
    std::vector<double> proba(k, 0.0);
    for (const auto& tree : model.trees) {
      const auto& leaf = tree.nodes[static_cast<std::size_t>(tree.leaf_for(x))];
      const auto p = normalized_histogram(leaf);
      for (std::size_t c = 0; c < k; ++c) proba[c] += p[c];
    }
    for (auto& v : proba) v /= static_cast<double>(model.trees.size());
    out.push_back(std::move(proba));
  }
  return out;
}

std::vector<double> feature_importance(const ForestModel& model) {
  std::vector<double> total(model.width(), 0.0);
  std::vector<double> per_tree(model.width());
  std::size_t contributing = 0;

  // recomputes node statistics from the stored leaf histograms
  for (const auto& tree : model.trees) {
    std::fill(per_tree.begin(), per_tree.end(), 0.0);
    // bottom-up histogram of every node
    std::vector<std::vector<std::uint32_t>> hist(tree.nodes.size());
    for (std::size_t i = tree.nodes.size(); i-- > 0;) {
      const auto& node = tree.nodes[i];
      if (node.feature < 0) {
        hist[i] = node.histogram;
      } else {
        const auto& l = hist[static_cast<std::size_t>(node.left)];
        const auto& r = hist[static_cast<std::size_t>(node.right)];
        hist[i].resize(l.size());
        for (std::size_t c = 0; c < l.size(); ++c) hist[i][c] = l[c] + r[c];
      }
    }
    auto stats = [&](std::size_t i) {
      double n = 0.0;
      double sq = 0.0;
      for (std::uint32_t c : hist[i]) {
        n += c;
        sq += static_cast<double>(c) * c;
      }
      const double gini = n > 0.0 ? 1.0 - sq / (n * n) : 0.0;
      return std::pair<double, double>(n, gini);
    };
    const double n_root = stats(0).first;
    if (n_root == 0.0) continue;
    bool any_split = false;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const auto& node = tree.nodes[i];
      if (node.feature < 0) continue;
      any_split = true;
      const auto [n, g] = stats(i);
      const auto [nl, gl] = stats(static_cast<std::size_t>(node.left));
      const auto [nr, gr] = stats(static_cast<std::size_t>(node.right));
      per_tree[static_cast<std::size_t>(node.feature)] += (n * g - nl * gl - nr * gr) / n_root;
    }
    if (!any_split) continue;
    double sum = std::accumulate(per_tree.begin(), per_tree.end(), 0.0);
    if (sum <= 0.0) continue;
    for (std::size_t f = 0; f < total.size(); ++f) total[f] += per_tree[f] / sum;
    ++contributing;
  }
  if (contributing == 0) return total;  // all zeros
  const double sum = std::accumulate(total.begin(), total.end(), 0.0);
  for (auto& v : total) v /= sum;
  return total;
}

nlohmann::ordered_json ForestModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "trafficbench-forest";
  j["version"] = 1;
  j["seed"] = seed;
  j["params"] = params.to_json();
  j["classes"] = classes;
  j["feature_names"] = feature_names;
  j["schema_fingerprint"] = schema_fingerprint;
  nlohmann::ordered_json trees_j = nlohmann::ordered_json::array();
  for (const auto& tree : trees) {
    nlohmann::ordered_json nodes_j = nlohmann::ordered_json::array();
    for (const auto& node : tree.nodes) {
      // [feature, threshold, left, right, histogram]
      nlohmann::ordered_json n = nlohmann::ordered_json::array();
      n.push_back(node.feature);
      n.push_back(node.threshold);
      n.push_back(node.left);
      n.push_back(node.right);
      n.push_back(node.histogram);
      nodes_j.push_back(std::move(n));
    }
    trees_j.push_back(std::move(nodes_j));
  }
  j["trees"] = std::move(trees_j);
  return j;
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format").get<std::string>() != "trafficbench-forest") {
    throw ValidationError("not a forest model, offending key: format");
  }
  ForestModel model;
  model.seed = j.at("seed").get<std::uint64_t>();
  model.params = ForestParams::from_json(j.at("params"));
  model.classes = j.at("classes").get<std::vector<std::string>>();
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  model.schema_fingerprint = j.at("schema_fingerprint").get<std::uint64_t>();
  for (const auto& nodes_j : j.at("trees")) {
    Tree tree;
    for (const auto& n : nodes_j) {
      TreeNode node;
      node.feature = n.at(0).get<int>();
      node.threshold = n.at(1).get<double>();
      node.left = n.at(2).get<int>();
      node.right = n.at(3).get<int>();
      node.histogram = n.at(4).get<std::vector<std::uint32_t>>();
      if (node.feature >= 0 &&
          static_cast<std::size_t>(node.feature) >= model.feature_names.size()) {
        throw ValidationError("forest node feature index out of range");
      }
      tree.nodes.push_back(std::move(node));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

void ForestModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << to_json().dump() << '\n';
}

ForestModel ForestModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model parse failure: ") + e.what());
  }
  return ForestModel::from_json(j);
}

}  // namespace trafficbench
