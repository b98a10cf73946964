// SPDX-License-Identifier: Apache-2.0
//
// Empirical marginal distributions. Order statistics z_(1..n) are mapped to
// probabilities k/(n+1); cdf and quantile interpolate linearly between those
// nodes and clamp outside the observed range.
#pragma once

#include <span>
#include <vector>

#include "copaug/dataset.hpp"

namespace copaug {

class EmpiricalMarginal {
 public:
  EmpiricalMarginal() = default;
  /// Throws Error(domain) for fewer than two values or non-finite input.
  explicit EmpiricalMarginal(std::span<const double> values);
  /// Rebuilds from an already sorted sample (artifact loading).
  static EmpiricalMarginal from_sorted(std::vector<double> sorted);

  std::size_t size() const noexcept { return sorted_.size(); }
  const std::vector<double>& sorted() const noexcept { return sorted_; }
  bool constant() const noexcept { return sorted_.front() == sorted_.back(); }

  /// Value in [1/(n+1), n/(n+1)]. A value tied in the sample maps to the
  /// average rank of its tie group.
  double cdf(double z) const;
  /// Throws Error(domain) unless 0 < u < 1.
  double quantile(double u) const;

 private:
  std::vector<double> sorted_;
};

inline EmpiricalMarginal fit_empirical(std::span<const double> values) {
  return EmpiricalMarginal(values);
}

/// Samples x features matrix of values strictly inside (0, 1).
using UMatrix = DataMatrix;

/// rank / (n + 1) per column with average ranks for ties.
UMatrix pseudo_observations(const DataMatrix& m);
/// Single-column variant.
std::vector<double> pseudo_observations(std::span<const double> column);

/// Maximum distance between two empirical CDFs.
double ks_statistic(std::span<const double> a, std::span<const double> b);

}  // namespace copaug
