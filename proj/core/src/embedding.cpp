#include "trafficbench/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "trafficbench/errors.hpp"

namespace trafficbench {

namespace {

std::string format_value(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& s, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ValidationError(std::string("bad ") + what + ": " + s);
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError(std::string("bad ") + what + ": " + s);
  }
  return v;
}

void require_token(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\n\r") != std::string::npos) {
    throw ValidationError(std::string(what) + " must be a nonempty whitespace-free token: " +
                          s);
  }
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

void EmbeddingSet::write(std::ostream& out) const {
  out << "EMB v1 " << points.size() << ' ' << d << '\n';
  for (const auto& p : points) {
    require_token(p.label, "label");
    if (p.r.size() != d) {
      throw ValidationError("embedding dimension mismatch at uid " +
                            std::to_string(p.packet_uid));
    }
    out << p.packet_uid << ' ' << p.label;
    for (double v : p.r) out << ' ' << format_value(v);
    out << '\n';
  }
}

void EmbeddingSet::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  write(out);
}

EmbeddingSet EmbeddingSet::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("embedding file is empty");
  auto head = split_ws(line);
  if (head.size() != 4 || head[0] != "EMB" || head[1] != "v1") {
    throw ValidationError("embedding header must be 'EMB v1 n d'");
  }
  EmbeddingSet set;
  const std::uint64_t n = parse_u64(head[2], "point count");
  set.d = parse_u64(head[3], "dimension");
  if (set.d == 0) throw ValidationError("embedding dimension must be >= 1");
  std::unordered_set<std::uint64_t> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = split_ws(line);
    if (toks.size() != set.d + 2) {
      throw ValidationError("embedding row has " + std::to_string(toks.size() - 2) +
                            " values, expected " + std::to_string(set.d));
    }
    PooledEmbedding p;
    p.packet_uid = parse_u64(toks[0], "uid");
    if (!seen.insert(p.packet_uid).second) {
      throw ValidationError("duplicate embedding uid " + std::to_string(p.packet_uid));
    }
    p.label = toks[1];
    p.r.reserve(set.d);
    for (std::size_t i = 0; i < set.d; ++i) p.r.push_back(parse_double(toks[2 + i], "value"));
    set.points.push_back(std::move(p));
  }
  if (set.points.size() != n) {
    throw ValidationError("embedding file declares " + std::to_string(n) + " points, found " +
                          std::to_string(set.points.size()));
  }
  return set;
}

EmbeddingSet EmbeddingSet::read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  return read(in);
}

void write_embedding_matrices(std::ostream& out, const std::vector<EmbeddingMatrix>& mats) {
  out << "EMBM v1\n";
  for (const auto& m : mats) {
    require_token(m.label, "label");
    out << m.packet_uid << ' ' << m.label << ' ' << m.rows.size() << ' ' << m.d << '\n';
    for (const auto& row : m.rows) {
      if (row.size() != m.d) {
        throw ValidationError("token row dimension mismatch at uid " +
                              std::to_string(m.packet_uid));
      }
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ' ';
        out << format_value(row[i]);
      }
      out << '\n';
    }
  }
}

void write_embedding_matrices_file(const std::string& path,
                                   const std::vector<EmbeddingMatrix>& mats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  write_embedding_matrices(out, mats);
}

std::vector<EmbeddingMatrix> read_embedding_matrices(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("embedding file is empty");
  {
    auto head = split_ws(line);
    if (head.size() != 2 || head[0] != "EMBM" || head[1] != "v1") {
      throw ValidationError("token-matrix header must be 'EMBM v1'");
    }
  }
  std::vector<EmbeddingMatrix> out;
  std::unordered_set<std::uint64_t> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto head = split_ws(line);
    if (head.size() != 4) {
      throw ValidationError("token-matrix block header must be 'uid label L d'");
    }
    EmbeddingMatrix m;
    m.packet_uid = parse_u64(head[0], "uid");
    if (!seen.insert(m.packet_uid).second) {
      throw ValidationError("duplicate embedding uid " + std::to_string(m.packet_uid));
    }
    m.label = head[1];
    const std::uint64_t rows = parse_u64(head[2], "token count");
    m.d = parse_u64(head[3], "dimension");
    if (rows == 0 || m.d == 0) {
      throw ValidationError("token matrix must have L >= 1 and d >= 1");
    }
    for (std::uint64_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) {
        throw ValidationError("token matrix truncated at uid " + std::to_string(m.packet_uid));
      }
      auto toks = split_ws(line);
      if (toks.size() != m.d) {
        throw ValidationError("token row has " + std::to_string(toks.size()) +
                              " values, expected " + std::to_string(m.d));
      }
      std::vector<double> row;
      row.reserve(m.d);
      for (const auto& t : toks) row.push_back(parse_double(t, "value"));
      m.rows.push_back(std::move(row));
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<EmbeddingMatrix> read_embedding_matrices_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  return read_embedding_matrices(in);
}

namespace {

void check_matrix(const EmbeddingMatrix& h) {
  if (h.rows.empty()) throw ValidationError("token matrix must have L >= 1");
  for (const auto& row : h.rows) {
    if (row.size() != h.d) throw ValidationError("token matrix has ragged rows");
    for (double v : row) {
      if (!std::isfinite(v)) throw ValidationError("token matrix has a non-finite value");
    }
  }
}

/// Indices ordered by row content; summing in this order makes the float
/// result independent of the input row order.
std::vector<std::size_t> canonical_order(const std::vector<std::vector<double>>& rows) {
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a] < rows[b];
  });
  return order;
}

}  // namespace

std::vector<double> pool_first(const EmbeddingMatrix& h) {
  check_matrix(h);
  return h.rows.front();
}

std::vector<double> pool_mean(const EmbeddingMatrix& h) {
  check_matrix(h);
  std::vector<double> sum(h.d, 0.0);
  for (std::size_t i : canonical_order(h.rows)) {
    for (std::size_t f = 0; f < h.d; ++f) sum[f] += h.rows[i][f];
  }
  for (auto& v : sum) v /= static_cast<double>(h.rows.size());
  return sum;
}

LuongPooled pool_luong(const EmbeddingMatrix& h, const std::vector<double>& q) {
  check_matrix(h);
  if (q.size() != h.d) throw ValidationError("query dimension mismatch");
  for (double v : q) {
    if (!std::isfinite(v)) throw ValidationError("query has a non-finite value");
  }
  const std::size_t n = h.rows.size();
  std::vector<double> dots(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    dots[j] = std::inner_product(h.rows[j].begin(), h.rows[j].end(), q.begin(), 0.0);
  }
  const double m = *std::max_element(dots.begin(), dots.end());

  // (dot, row content) ordering keeps every accumulation below exactly
  // permutation invariant
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dots[a] != dots[b]) return dots[a] < dots[b];
    return h.rows[a] < h.rows[b];
  });

  std::vector<double> expd(n, 0.0);
  double denom = 0.0;
  for (std::size_t j : order) {
    expd[j] = std::exp(dots[j] - m);
    denom += expd[j];
  }
  LuongPooled out;
  out.weights.resize(n);
  for (std::size_t j = 0; j < n; ++j) out.weights[j] = expd[j] / denom;
  out.r.assign(h.d, 0.0);
  for (std::size_t j : order) {
    const double w = out.weights[j];
    for (std::size_t f = 0; f < h.d; ++f) out.r[f] += w * h.rows[j][f];
  }
  return out;
}

double PurityResult::fraction_at(std::size_t purity) const {
  std::size_t total = 0;
  for (std::size_t c : histogram) total += c;
  if (total == 0 || purity >= histogram.size()) return 0.0;
  return static_cast<double>(histogram[purity]) / static_cast<double>(total);
}

namespace {

using Cand = std::pair<double, std::uint64_t>;  // (squared distance, uid)

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return d2;
}

/// Vantage-point tree over point indices; exact k-NN with (distance, uid)
/// tie ordering.
class VpTree {
 public:
  VpTree(const std::vector<std::vector<double>>& pts, const std::vector<std::uint64_t>& uids)
      : pts_(pts), uids_(uids) {
    items_.resize(pts.size());
    std::iota(items_.begin(), items_.end(), 0);
    root_ = build(0, items_.size());
  }

  /// k nearest to pts_[self], excluding self, ordered by (d2, uid).
  std::vector<Cand> query(std::size_t self, std::size_t k) const {
    std::priority_queue<Cand> heap;  // max-heap: top = worst kept candidate
    search(root_, self, k, heap);
    std::vector<Cand> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

 private:
  struct Node {
    std::size_t point = 0;
    double mu = 0.0;
    int inside = -1;
    int outside = -1;
  };

  int build(std::size_t lo, std::size_t hi) {
    if (lo >= hi) return -1;
    // lowest uid in range is the vantage point: deterministic without an rng
    std::size_t vp_pos = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      if (uids_[items_[i]] < uids_[items_[vp_pos]]) vp_pos = i;
    }
    std::swap(items_[lo], items_[vp_pos]);
    const std::size_t vp = items_[lo];
    Node node;
    node.point = vp;
    if (hi - lo > 1) {
      const std::size_t mid = lo + 1 + (hi - lo - 1) / 2;
      std::nth_element(items_.begin() + static_cast<std::ptrdiff_t>(lo + 1),
                       items_.begin() + static_cast<std::ptrdiff_t>(mid),
                       items_.begin() + static_cast<std::ptrdiff_t>(hi),
                       [&](std::size_t a, std::size_t b) {
                         const double da = sq_dist(pts_[vp], pts_[a]);
                         const double db = sq_dist(pts_[vp], pts_[b]);
                         if (da != db) return da < db;
                         return uids_[a] < uids_[b];
                       });
      node.mu = std::sqrt(sq_dist(pts_[vp], pts_[items_[mid]]));
      const int self = static_cast<int>(nodes_.size());
      nodes_.push_back(node);
      const int inside = build(lo + 1, mid + 1);
      const int outside = build(mid + 1, hi);
      nodes_[static_cast<std::size_t>(self)].inside = inside;
      nodes_[static_cast<std::size_t>(self)].outside = outside;
      return self;
    }
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size() - 1);
  }

  void offer(std::size_t cand, std::size_t self, std::size_t k,
             std::priority_queue<Cand>& heap) const {
    if (cand == self) return;
    const Cand c{sq_dist(pts_[self], pts_[cand]), uids_[cand]};
    if (heap.size() < k) {
      heap.push(c);
    } else if (c < heap.top()) {
      heap.pop();
      heap.push(c);
    }
  }

  void search(int node_id, std::size_t self, std::size_t k,
              std::priority_queue<Cand>& heap) const {
    if (node_id < 0) return;
    const Node& node = nodes_[static_cast<std::size_t>(node_id)];
    offer(node.point, self, k, heap);
    if (node.inside < 0 && node.outside < 0) return;
    const double d = std::sqrt(sq_dist(pts_[self], pts_[node.point]));
    // non-strict bounds keep boundary ties reachable, so results match the
    // brute-force path exactly
    const bool full = heap.size() >= k;
    if (d < node.mu) {
      search(node.inside, self, k, heap);
      if (!full || d + std::sqrt(heap.top().first) >= node.mu) {
        search(node.outside, self, k, heap);
      }
    } else {
      search(node.outside, self, k, heap);
      if (!full || d - std::sqrt(heap.top().first) <= node.mu) {
        search(node.inside, self, k, heap);
      }
    }
  }

  const std::vector<std::vector<double>>& pts_;
  const std::vector<std::uint64_t>& uids_;
  std::vector<std::size_t> items_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace

PurityResult knn_purity(const EmbeddingSet& set, std::size_t k, PurityMetric metric,
                        PurityEngine engine) {
  const std::size_t n = set.points.size();
  if (k < 1) throw ValidationError("k must be >= 1");
  if (n <= k) {
    throw ValidationError("purity needs more than k points, got " + std::to_string(n));
  }
  std::unordered_set<std::uint64_t> seen;
  std::vector<std::vector<double>> pts(n);
  std::vector<std::uint64_t> uids(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = set.points[i];
    if (p.r.size() != set.d) {
      throw ValidationError("embedding dimension mismatch at uid " +
                            std::to_string(p.packet_uid));
    }
    if (!seen.insert(p.packet_uid).second) {
      throw ValidationError("duplicate embedding uid " + std::to_string(p.packet_uid));
    }
    uids[i] = p.packet_uid;
    pts[i] = p.r;
    if (metric == PurityMetric::cosine) {
      double norm = 0.0;
      for (double v : pts[i]) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (auto& v : pts[i]) v /= norm;
      }
    }
  }

  const bool indexed = engine == PurityEngine::indexed ||
                       (engine == PurityEngine::auto_select && n > 10000);

  std::unordered_map<std::uint64_t, std::size_t> index_of;
  index_of.reserve(n);
  for (std::size_t i = 0; i < n; ++i) index_of[uids[i]] = i;

  PurityResult result;
  result.k = k;
  result.histogram.assign(k + 1, 0);
  result.per_point.resize(n);

  VpTree* tree = nullptr;
  std::optional<VpTree> tree_storage;
  if (indexed) {
    tree_storage.emplace(pts, uids);
    tree = &*tree_storage;
  }

  std::vector<Cand> cands;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (indexed) {
      cands = tree->query(i, k);
    } else {
      cands.clear();
      cands.reserve(n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        cands.push_back({sq_dist(pts[i], pts[j]), uids[j]});
      }
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k),
                        cands.end());
      cands.resize(k);
    }
    std::size_t match = 0;
    for (const auto&[d2, uid] : cands) {
      (void)d2;
      if (set.points[index_of[uid]].label == set.points[i].label) ++match;
    }
    result.per_point[i] = match;
    ++result.histogram[match];
    total += static_cast<double>(match);
  }
  result.mean_purity = total / static_cast<double>(n);
  return result;
}

}  // namespace trafficbench
