#pragma once

// Empirical probability measures: weighted point clouds, their first two
// moments, and L2-Wasserstein distances between clouds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mvavg/error.hpp"

namespace mvavg {

/// Squared Euclidean norm; the default norm for moments.
struct EuclideanNormSq {
  double operator()(std::span<const double> x) const noexcept {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  }
};

/// Finite point cloud standing in for a probability measure. Points are
/// stored row-major: point i occupies [i*dim, (i+1)*dim).
class SampleSet {
 public:
  SampleSet(std::vector<double> flat_points, std::size_t dim,
            std::optional<std::vector<double>> weights = std::nullopt)
      : points_(std::move(flat_points)), dim_(dim), weights_(std::move(weights)) {
    validate();
  }

  SampleSet(std::initializer_list<std::initializer_list<double>> points) {
    if (points.size() == 0) throw StructuralError("SampleSet needs at least one point");
    dim_ = points.begin()->size();
    for (const auto& p : points) {
      if (p.size() != dim_) throw StructuralError("SampleSet points have mixed dimensions");
      points_.insert(points_.end(), p.begin(), p.end());
    }
    validate();
  }

  /// One-dimensional cloud from scalar values.
  static SampleSet scalars(std::vector<double> values,
                           std::optional<std::vector<double>> weights = std::nullopt) {
    return SampleSet(std::move(values), 1, std::move(weights));
  }

  std::size_t size() const noexcept { return points_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const double> point(std::size_t i) const noexcept {
    return {points_.data() + i * dim_, dim_};
  }
  std::span<const double> flat() const noexcept { return points_; }
  bool uniform() const noexcept { return !weights_.has_value(); }
  double weight(std::size_t i) const noexcept {
    return weights_ ? (*weights_)[i] : 1.0 / static_cast<double>(size());
  }

 private:
  void validate() const {
    if (dim_ == 0) throw StructuralError("SampleSet dimension must be >= 1");
    if (points_.empty()) throw StructuralError("SampleSet needs at least one point");
    if (points_.size() % dim_ != 0) throw StructuralError("SampleSet points have mixed dimensions");
    if (weights_) {
      if (weights_->size() != size()) throw StructuralError("SampleSet weight count != point count");
      double total = 0.0;
      for (double w : *weights_) {
        if (!(w >= 0.0)) throw StructuralError("SampleSet weights must be nonnegative");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-12) throw StructuralError("SampleSet weights must sum to 1");
    }
  }

  std::vector<double> points_;
  std::size_t dim_ = 1;
  std::optional<std::vector<double>> weights_;
};

struct MeasureMoments {
  std::vector<double> mean;
  double second_moment = 0.0;  // integral of the squared norm
};

/// Weighted mean and weighted mean squared norm. `norm_sq` maps a point to
/// its squared norm; the mean is computed componentwise.
template <typename NormSq = EuclideanNormSq>
MeasureMoments moments(const SampleSet& m, NormSq norm_sq = {}) {
  MeasureMoments out;
  out.mean.assign(m.dim(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double w = m.weight(i);
    const auto p = m.point(i);
    for (std::size_t k = 0; k < m.dim(); ++k) out.mean[k] += w * p[k];
    out.second_moment += w * norm_sq(p);
  }
  return out;
}

/// Exact W2 between two uniform 1D clouds of equal size via the sorted coupling.
inline double w2_1d(const SampleSet& a, const SampleSet& b) {
  if (a.dim() != 1 || b.dim() != 1) {
    throw UnsupportedCase("w2_1d needs one-dimensional clouds; use w2_coupling_bound");
  }
  if (a.size() != b.size() || !a.uniform() || !b.uniform()) {
    throw UnsupportedCase(
        "w2_1d needs uniform weights and equal cardinality; use w2_coupling_bound");
  }
  std::vector<double> sa(a.flat().begin(), a.flat().end());
  std::vector<double> sb(b.flat().begin(), b.flat().end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = sa[i] - sb[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(sa.size()));
}

/// sqrt of the mean squared distance under the index (identity) coupling.
/// An upper bound on W2 for index-aligned clouds of any dimension.
template <typename NormSq = EuclideanNormSq>
double w2_coupling_bound(const SampleSet& a, const SampleSet& b, NormSq norm_sq = {}) {
  if (a.size() != b.size()) throw StructuralError("w2_coupling_bound: cardinality mismatch");
  if (a.dim() != b.dim()) throw StructuralError("w2_coupling_bound: dimension mismatch");
  std::vector<double> diff(a.dim());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto p = a.point(i);
    const auto q = b.point(i);
    for (std::size_t k = 0; k < a.dim(); ++k) diff[k] = p[k] - q[k];
    s += norm_sq(std::span<const double>(diff));
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

/// Exact W2 by enumerating every permutation coupling. Only for n <= 8.
inline double w2_bruteforce(const SampleSet& a, const SampleSet& b) {
  constexpr std::size_t kMaxPoints = 8;
  if (a.size() != b.size()) throw StructuralError("w2_bruteforce: cardinality mismatch");
  if (a.dim() != b.dim()) throw StructuralError("w2_bruteforce: dimension mismatch");
  if (!a.uniform() || !b.uniform()) throw UnsupportedCase("w2_bruteforce: uniform weights only");
  const std::size_t n = a.size();
  if (n > kMaxPoints) throw UnsupportedCase("w2_bruteforce refuses n > 8 (n! couplings)");

  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double c = 0.0;
      for (std::size_t k = 0; k < a.dim(); ++k) {
        const double d = a.point(i)[k] - b.point(j)[k];
        c += d * d;
      }
      cost[i * n + j] = c;
    }
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost[i * n + perm[i]];
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(n));
}

}  // namespace mvavg
