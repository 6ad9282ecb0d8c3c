#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace trafficbench {

struct EmbeddingMatrix {
  std::uint64_t packet_uid = 0;
  std::string label;
  std::size_t d = 0;
  std::vector<std::vector<double>> rows;  // L x d, row j = token j

  std::size_t tokens() const { return rows.size(); }
};

struct PooledEmbedding {
  std::uint64_t packet_uid = 0;
  std::string label;
  std::vector<double> r;
};

struct EmbeddingSet {
  std::size_t d = 0;
  std::vector<PooledEmbedding> points;

  /// Header `EMB v1 n d`, then n lines `uid label v1 .. vd`.
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
  static EmbeddingSet read(std::istream& in);
  static EmbeddingSet read_file(const std::string& path);
};

/// Token-matrix file: header `EMBM v1`, then blocks `uid label L d` followed
/// by L embedding rows.
std::vector<EmbeddingMatrix> read_embedding_matrices(std::istream& in);
std::vector<EmbeddingMatrix> read_embedding_matrices_file(const std::string& path);
void write_embedding_matrices(std::ostream& out, const std::vector<EmbeddingMatrix>& mats);
void write_embedding_matrices_file(const std::string& path,
                                   const std::vector<EmbeddingMatrix>& mats);

/// r = e_0.
std::vector<double> pool_first(const EmbeddingMatrix& h);

/// r = (sum_j e_j) / L. Summands are added in a canonical row order so the
/// result is exactly permutation invariant despite float rounding.
std::vector<double> pool_mean(const EmbeddingMatrix& h);

struct LuongPooled {
  std::vector<double> r;
  std::vector<double> weights;
};

/// w = softmax_j(e_j . q) with max-subtraction; r = sum_j w_j e_j, summed in
/// canonical order for exact permutation invariance of r.
LuongPooled pool_luong(const EmbeddingMatrix& h, const std::vector<double>& q);

enum class PurityMetric { euclidean, cosine };
enum class PurityEngine { auto_select, brute, indexed };

struct PurityResult {
  std::size_t k = 0;
  std::vector<std::size_t> histogram;  // counts of points with purity 0..k
  double mean_purity = 0.0;            // mean matching-neighbor count
  std::vector<std::size_t> per_point;  // matching-neighbor count per point

  double fraction_at(std::size_t purity) const;
};

/// For each point: k nearest neighbors excluding itself, counting those that
/// share its label. Brute force up to 10^4 points, a vantage-point tree
/// above; both paths break distance ties by (distance, packet_uid) and give
/// identical results.
PurityResult knn_purity(const EmbeddingSet& set, std::size_t k = 5,
                        PurityMetric metric = PurityMetric::euclidean,
                        PurityEngine engine = PurityEngine::auto_select);

}  // namespace trafficbench
