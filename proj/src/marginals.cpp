// SPDX-License-Identifier: Apache-2.0
#include "copaug/marginals.hpp"

#include <algorithm>
#include <cmath>

#include "copaug/error.hpp"
#include "copaug/kernels.hpp"

namespace copaug {

EmpiricalMarginal::EmpiricalMarginal(std::span<const double> values)
    : sorted_(values.begin(), values.end()) {
  require(sorted_.size() >= 2, ErrorCategory::domain,
          "empirical marginal needs at least two values");
  for (double v : sorted_)
    require(std::isfinite(v), ErrorCategory::domain,
            "empirical marginal input must be finite");
  std::sort(sorted_.begin(), sorted_.end());
}

EmpiricalMarginal EmpiricalMarginal::from_sorted(std::vector<double> sorted) {
  require(sorted.size() >= 2, ErrorCategory::schema,
          "empirical marginal needs at least two values");
  require(std::is_sorted(sorted.begin(), sorted.end()), ErrorCategory::schema,
          "marginal sample must be sorted ascending");
  EmpiricalMarginal m;
  m.sorted_ = std::move(sorted);
  return m;
}

double EmpiricalMarginal::cdf(double z) const {
  const auto n = sorted_.size();
  const double scale = 1.0 / static_cast<double>(n + 1);
  if (z <= sorted_.front()) {
    if (z < sorted_.front()) return scale;
  }
  if (z > sorted_.back()) return static_cast<double>(n) * scale;

  // Positions are 1-based: node k sits at (z_(k), k/(n+1)).
  auto lo = std::lower_bound(sorted_.begin(), sorted_.end(), z);
  auto hi = std::upper_bound(lo, sorted_.end(), z);
  if (lo != hi) {
    const double first = static_cast<double>(lo - sorted_.begin()) + 1.0;
    const double last = static_cast<double>(hi - sorted_.begin());
    return 0.5 * (first + last) * scale;
  }
  // sorted_[k-1] < z < sorted_[k] with k = lo - begin.
  const auto k = static_cast<std::size_t>(lo - sorted_.begin());
  const double a = sorted_[k - 1];
  const double b = sorted_[k];
  const double t = (z - a) / (b - a);
  return (static_cast<double>(k) + t) * scale;
}

double EmpiricalMarginal::quantile(double u) const {
  require(u > 0.0 && u < 1.0, ErrorCategory::domain, "quantile needs 0 < u < 1");
  const auto n = sorted_.size();
  const double pos = u * static_cast<double>(n + 1);
  if (pos <= 1.0) return sorted_.front();
  if (pos >= static_cast<double>(n)) return sorted_.back();
  const auto k = static_cast<std::size_t>(std::floor(pos));
  const double t = pos - static_cast<double>(k);
  const double a = sorted_[k - 1];
  const double b = sorted_[k];
  return t == 0.0 ? a : a + t * (b - a);
}

std::vector<double> pseudo_observations(std::span<const double> column) {
  const auto n = column.size();
  require(n >= 2, ErrorCategory::domain, "pseudo-observations need n >= 2");
  for (double v : column)
    require(std::isfinite(v), ErrorCategory::domain,
            "pseudo-observations need finite entries");
  std::vector<double> out(n);
  kernels::average_ranks(column, out);
  const double denom = static_cast<double>(n + 1);
  for (auto& r : out) r /= denom;
  return out;
}

UMatrix pseudo_observations(const DataMatrix& m) {
  require(m.rows() >= 2, ErrorCategory::domain, "pseudo-observations need n >= 2");
  for (double v : m.data())
    require(std::isfinite(v), ErrorCategory::domain,
            "pseudo-observations need finite entries");
  UMatrix u = kernels::parallel::pseudo_observations(m);
  u.labels = m.labels;
  return u;
}

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), ErrorCategory::domain, "KS needs nonempty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace copaug
