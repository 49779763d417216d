#include "polysrc/correlation.hpp"

#include <cmath>
#include <cstring>

#include "polysrc/errors.hpp"
#include "polysrc/io.hpp"

namespace polysrc::correlation {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;

namespace {

// Neumaier step on interleaved doubles.
void compensated_add(double* sum, double* comp, const double* x, size_t len) {
  for (size_t i = 0; i < len; ++i) {
    const double s = sum[i];
    const double t = s + x[i];
    if (std::abs(s) >= std::abs(x[i])) {
      comp[i] += (s - t) + x[i];
    } else {
      comp[i] += (x[i] - t) + s;
    }
    sum[i] = t;
  }
}

void compensated_add(MatrixXcd& sum, MatrixXcd& comp, const MatrixXcd& x) {
  compensated_add(reinterpret_cast<double*>(sum.data()), reinterpret_cast<double*>(comp.data()),
                  reinterpret_cast<const double*>(x.data()), 2 * static_cast<size_t>(x.size()));
}

}  // namespace

CorrelationTensor::CorrelationTensor(int n, size_t nodes, bool second_moments)
    : n_(n), nodes_(nodes), second_moments_(second_moments) {
  if (n < 1) throw ConfigError("correlation tensor needs n >= 1");
  if (nodes == 0) throw ConfigError("correlation tensor needs at least one node");
  for (int alpha = 1; alpha <= 4; ++alpha)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) keys_.push_back({alpha, i, j});
  const Index P = static_cast<Index>(nodes);
  sum_.assign(keys_.size(), MatrixXcd::Zero(P, P));
  comp_.assign(keys_.size(), MatrixXcd::Zero(P, P));
  if (second_moments_) m2_.assign(keys_.size(), MatrixXd::Zero(P, P));
}

int CorrelationTensor::slab_index(int alpha, int i, int j) const {
  if (alpha < 1 || alpha > 4 || i < 0 || j < i || j >= n_) {
    throw ConfigError("slab index outside Sigma (need 0 <= i <= j < n, alpha in 1..4)");
  }
  const int pairs = n_ * (n_ + 1) / 2;
  // position of (i, j) among pairs with i <= j in row order
  const int pos = i * n_ - i * (i - 1) / 2 + (j - i);
  return (alpha - 1) * pairs + pos;
}

void CorrelationTensor::accumulate(const direct::BoundaryTrace& trace) {
  if (trace.n != n_ || trace.nodes != nodes_) {
    throw ShapeMismatchError("trace shape does not match the correlation tensor");
  }
  accumulate_block(trace.data);
}

void CorrelationTensor::accumulate_block(const MatrixXcd& X) {
  const Index P = static_cast<Index>(nodes_);
  if (X.rows() != 2 * n_ * P) throw ShapeMismatchError("trace block has the wrong length");
  if (X.cols() == 0) return;
  MatrixXd X2;
  if (second_moments_) X2 = X.cwiseAbs2();
  MatrixXcd S(P, P);
  for (size_t s = 0; s < keys_.size(); ++s) {
    const SlabKey& key = keys_[s];
    const bool a_neu = key.alpha == 2 || key.alpha == 4;
    const bool b_neu = key.alpha == 3 || key.alpha == 4;
    const Index ra = ((a_neu ? n_ : 0) + key.i) * P;
    const Index rb = ((b_neu ? n_ : 0) + key.j) * P;
    S.noalias() = X.middleRows(ra, P) * X.middleRows(rb, P).transpose();
    if (key.i == key.j && (key.alpha == 1 || key.alpha == 4)) {
      const MatrixXcd St = S.transpose();
      S = 0.5 * (S + St);
    }
    compensated_add(sum_[s], comp_[s], S);
    if (second_moments_) {
      m2_[s].noalias() += X2.middleRows(ra, P) * X2.middleRows(rb, P).transpose();
    }
  }
  count_ += static_cast<uint64_t>(X.cols());
}

void CorrelationTensor::merge(const CorrelationTensor& other) {
  if (other.n_ != n_ || other.nodes_ != nodes_) {
    throw ShapeMismatchError("cannot merge tensors of different shapes");
  }
  for (size_t s = 0; s < keys_.size(); ++s) {
    compensated_add(sum_[s], comp_[s], other.sum_[s]);
    compensated_add(sum_[s], comp_[s], other.comp_[s]);
    if (second_moments_) {
      if (!other.second_moments_) throw ShapeMismatchError("merge: second moments missing");
      m2_[s] += other.m2_[s];
    }
  }
  count_ += other.count_;
}

MatrixXcd CorrelationTensor::mean(size_t slab) const {
  if (count_ == 0) throw ConfigError("correlation tensor is empty");
  return (sum_[slab] + comp_[slab]) / static_cast<double>(count_);
}

MatrixXcd CorrelationTensor::mean(int alpha, int i, int j) const {
  return mean(static_cast<size_t>(slab_index(alpha, i, j)));
}

MatrixXcd CorrelationTensor::block(bool a_neumann, int i, bool b_neumann, int j) const {
  auto alpha_of = [](bool a, bool b) { return a ? (b ? 4 : 2) : (b ? 3 : 1); };
  if (i <= j) return mean(alpha_of(a_neumann, b_neumann), i, j);
  return mean(alpha_of(b_neumann, a_neumann), j, i).transpose();
}

MatrixXd CorrelationTensor::standard_error(int alpha, int i, int j) const {
  if (!second_moments_) throw ConfigError("standard errors need second-moment accumulation");
  if (count_ < 2) throw ConfigError("standard errors need at least two realizations");
  const size_t s = static_cast<size_t>(slab_index(alpha, i, j));
  const double P = static_cast<double>(count_);
  const MatrixXcd mu = mean(s);
  MatrixXd var = (m2_[s] / P - mu.cwiseAbs2()).cwiseMax(0.0) * (P / (P - 1.0));
  return (var / P).cwiseSqrt();
}

namespace {
constexpr char kMagic[8] = {'P', 'S', 'C', 'O', 'R', 'R', '0', '1'};
}

void CorrelationTensor::save(const std::string& path, const std::string& params_hash) const {
  io::BinaryWriter w;
  w.bytes(kMagic, sizeof(kMagic));
  w.fixed_string(params_hash, 64);
  w.u32(static_cast<uint32_t>(n_));
  w.u64(nodes_);
  w.u64(count_);
  w.u32(second_moments_ ? 1u : 0u);
  for (size_t s = 0; s < keys_.size(); ++s) {
    w.doubles(reinterpret_cast<const double*>(sum_[s].data()), 2 * sum_[s].size());
    w.doubles(reinterpret_cast<const double*>(comp_[s].data()), 2 * comp_[s].size());
    if (second_moments_) w.doubles(m2_[s].data(), m2_[s].size());
  }
  w.write_with_digest(path);
}

CorrelationTensor CorrelationTensor::load(const std::string& path, std::string* params_hash) {
  io::BinaryReader r = io::BinaryReader::open_with_digest(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path + ": not a correlation checkpoint");
  }
  const std::string hash = r.fixed_string(64);
  if (params_hash) *params_hash = hash;
  const int n = static_cast<int>(r.u32());
  const size_t nodes = r.u64();
  const uint64_t count = r.u64();
  const bool m2 = r.u32() != 0;
  CorrelationTensor t(n, nodes, m2);
  t.count_ = count;
  for (size_t s = 0; s < t.keys_.size(); ++s) {
    r.doubles(reinterpret_cast<double*>(t.sum_[s].data()), 2 * t.sum_[s].size());
    r.doubles(reinterpret_cast<double*>(t.comp_[s].data()), 2 * t.comp_[s].size());
    if (m2) r.doubles(t.m2_[s].data(), t.m2_[s].size());
  }
  r.expect_end();
  return t;
}

DataStatistic compute_M(const CorrelationTensor& tensor, const SphereQuadrature& quad) {
  if (tensor.count() == 0) throw ConfigError("compute_M: empty correlation tensor");
  if (quad.size() != tensor.nodes()) throw ShapeMismatchError("compute_M: quadrature size");
  DataStatistic d;
  const Eigen::VectorXd& w = quad.weights;
  for (size_t s = 0; s < tensor.slab_count(); ++s) {
    const MatrixXd a2 = tensor.mean(s).cwiseAbs2();
    const double norm = std::sqrt(std::max(0.0, w.dot(a2 * w)));
    d.keys.push_back(tensor.keys()[s]);
    d.norms.push_back(norm);
    d.M = std::max(d.M, norm);
  }
  return d;
}

}  // namespace polysrc::correlation
