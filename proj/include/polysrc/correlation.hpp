#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polysrc/direct.hpp"
#include "polysrc/quadrature.hpp"

namespace polysrc::correlation {

/// Index of one stored slab F^alpha_{i,j}, i <= j:
///   alpha 1: E[D_i(x) D_j(y)]    alpha 2: E[N_i(x) D_j(y)]
///   alpha 3: E[D_i(x) N_j(y)]    alpha 4: E[N_i(x) N_j(y)]
struct SlabKey {
  int alpha = 1;
  int i = 0;
  int j = 0;
};

/// Streaming estimator of the boundary correlation tensors. Plain
/// (unconjugated) products are averaged. Sums use Neumaier compensation so
/// the result does not depend on accumulation order beyond ~1e-15 relative.
class CorrelationTensor {
 public:
  CorrelationTensor(int n, size_t nodes, bool second_moments = true);

  int n() const { return n_; }
  size_t nodes() const { return nodes_; }
  uint64_t count() const { return count_; }
  bool has_second_moments() const { return second_moments_; }
  size_t slab_count() const { return keys_.size(); }
  const std::vector<SlabKey>& keys() const { return keys_; }
  int slab_index(int alpha, int i, int j) const;

  void accumulate(const direct::BoundaryTrace& trace);
  /// Each column of X is one trace vector (layout of BoundaryTrace::data).
  void accumulate_block(const Eigen::MatrixXcd& X);
  /// Adds another estimator's realizations.
  void merge(const CorrelationTensor& other);

  /// Current estimate of F^alpha_{i,j} (nodes x nodes).
  Eigen::MatrixXcd mean(int alpha, int i, int j) const;
  Eigen::MatrixXcd mean(size_t slab) const;

  /// E[A_i(p) B_j(q)] as a nodes x nodes block for any i, j, where A, B are
  /// Dirichlet (false) or Neumann (true) traces; i > j reads the transposed slab.
  Eigen::MatrixXcd block(bool a_neumann, int i, bool b_neumann, int j) const;

  /// Entrywise sample standard deviation / sqrt(P). Needs count >= 2.
  Eigen::MatrixXd standard_error(int alpha, int i, int j) const;

  /// Binary checkpoint: header (magic, params hash, n, nodes, count) and the
  /// running sums; resumable with load().
  void save(const std::string& path, const std::string& params_hash) const;
  static CorrelationTensor load(const std::string& path, std::string* params_hash = nullptr);

 private:
  int n_;
  size_t nodes_;
  bool second_moments_;
  uint64_t count_ = 0;
  std::vector<SlabKey> keys_;
  std::vector<Eigen::MatrixXcd> sum_, comp_;
  std::vector<Eigen::MatrixXd> m2_;
};

struct DataStatistic {
  double M = 0.0;
  std::vector<SlabKey> keys;
  std::vector<double> norms;  // discrete L^2(dB_R x dB_R) norm per slab
};

DataStatistic compute_M(const CorrelationTensor& tensor, const SphereQuadrature& quad);

}  // namespace polysrc::correlation
