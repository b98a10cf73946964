// SPDX-License-Identifier: Apache-2.0
#include "copaug/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "copaug/error.hpp"
#include "copaug/kernels.hpp"
#include "copaug/rng.hpp"
#include "text_io.hpp"

namespace copaug {

std::string_view to_string(Statistic s) noexcept {
  switch (s) {
    case Statistic::mean: return "mean";
    case Statistic::variance: return "variance";
    case Statistic::std: return "std";
    case Statistic::q10: return "q10";
    case Statistic::q50: return "q50";
    case Statistic::q90: return "q90";
  }
  return "?";
}

double quantile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), ErrorCategory::domain, "quantile of an empty sample");
  require(q >= 0.0 && q <= 1.0, ErrorCategory::domain, "quantile level outside [0, 1]");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::array<double, kStatistics.size()> projection_statistics(std::vector<double> p) {
  require(!p.empty(), ErrorCategory::domain, "projection of an empty matrix");
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : p) ss += (v - mean) * (v - mean);
  const double var = p.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, var, std::sqrt(var), quantile_sorted(p, 0.1), quantile_sorted(p, 0.5),
          quantile_sorted(p, 0.9)};
}

namespace {

std::vector<double> project(const DataMatrix& m, const std::vector<double>& w) {
  std::vector<double> p(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < w.size(); ++c) s += row[c] * w[c];
    p[r] = s;
  }
  return p;
}

}  // namespace

ProjectionReport random_projection_report(const DataMatrix& real, const DataMatrix& synth,
                                          std::size_t iters, std::uint64_t seed) {
  require(real.cols() == synth.cols(), ErrorCategory::domain,
          "projection report: column counts differ (" + std::to_string(real.cols()) + " vs " +
              std::to_string(synth.cols()) + ")");
  require(iters >= 1, ErrorCategory::domain, "projection report needs at least one iteration");
  require(real.rows() >= 1 && synth.rows() >= 1, ErrorCategory::domain,
          "projection report needs nonempty matrices");
  ProjectionReport rep;
  rep.iterations = iters;
  rep.seed = seed;
  for (auto& v : rep.pairs) v.resize(iters);
  const auto n_it = static_cast<std::int64_t>(iters);
#pragma omp parallel for schedule(static)
  for (std::int64_t it = 0; it < n_it; ++it) {
    CounterRng rng(seed, static_cast<std::uint64_t>(it));
    std::vector<double> w(real.cols());
    for (auto& x : w) x = rng.normal();
    const auto a = projection_statistics(project(real, w));
    const auto b = projection_statistics(project(synth, w));
    for (std::size_t s = 0; s < kStatistics.size(); ++s)
      rep.pairs[s][static_cast<std::size_t>(it)] = {a[s], b[s]};
  }
  return rep;
}

std::vector<double> band_depth(const DataMatrix& curves) {
  require(curves.rows() >= 3, ErrorCategory::domain, "band depth needs at least 3 curves");
  return kernels::parallel::band_depth(curves);
}

DepthRanking depth_groups(std::span<const double> depths) {
  require(!depths.empty(), ErrorCategory::domain, "depth grouping needs at least one curve");
  DepthRanking r;
  r.depths.assign(depths.begin(), depths.end());
  r.order.resize(depths.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return depths[a] > depths[b]; });
  const std::size_t n = depths.size();
  const std::size_t quarter = (n + 3) / 4;
  r.group.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    r.group[r.order[k]] = k < quarter       ? DepthGroup::central
                          : k < 2 * quarter ? DepthGroup::middle
                                            : DepthGroup::outer;
  r.median = r.order.front();
  return r;
}

std::vector<LevelBand> depth_envelope(const DataMatrix& curves, const DepthRanking& ranking,
                                      double fraction) {
  require(ranking.order.size() == curves.rows(), ErrorCategory::domain,
          "depth ranking does not match the curves");
  require(fraction > 0.0 && fraction <= 1.0, ErrorCategory::domain,
          "envelope fraction must lie in (0, 1]");
  const auto take = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(curves.rows()))));
  std::vector<LevelBand> out(curves.cols());
  for (std::size_t c = 0; c < curves.cols(); ++c) {
    auto& b = out[c];
    b.level = c;
    b.mid = curves(ranking.median, c);
    b.low = HUGE_VAL;
    b.high = -HUGE_VAL;
    for (std::size_t k = 0; k < take; ++k) {
      const double v = curves(ranking.order[k], c);
      b.low = std::min(b.low, v);
      b.high = std::max(b.high, v);
    }
  }
  return out;
}

ErrorMetrics error_metrics(const DataMatrix& y_true, const DataMatrix& y_pred) {
  require(y_true.rows() == y_pred.rows() && y_true.cols() == y_pred.cols(), ErrorCategory::domain,
          "error metrics: shape mismatch");
  require(y_true.rows() >= 1 && y_true.cols() >= 1, ErrorCategory::domain,
          "error metrics: empty input");
  ErrorMetrics m;
  double sum = 0.0, abs_sum = 0.0;
  const auto& t = y_true.data();
  const auto& p = y_pred.data();
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double d = t[k] - p[k];
    sum += d;
    abs_sum += std::abs(d);
  }
  const double n = static_cast<double>(t.size());
  m.mb = sum / n;
  m.mae = abs_sum / n;
  std::vector<double> col(y_true.rows());
  for (std::size_t c = 0; c < y_true.cols(); ++c) {
    for (std::size_t r = 0; r < y_true.rows(); ++r) col[r] = y_true(r, c) - y_pred(r, c);
    std::sort(col.begin(), col.end());
    m.per_level.push_back(
        {c, quantile_sorted(col, 0.1), quantile_sorted(col, 0.5), quantile_sorted(col, 0.9)});
  }
  return m;
}

namespace {

std::ofstream open_report(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot write " + path.string());
  return out;
}

}  // namespace

void write_projection_report(const std::filesystem::path& path, const ProjectionReport& r) {
  auto out = open_report(path);
  std::string s = "statistic,iteration,s_real,s_synth\n";
  for (std::size_t k = 0; k < kStatistics.size(); ++k)
    for (std::size_t i = 0; i < r.pairs[k].size(); ++i) {
      s += to_string(kStatistics[k]);
      s += ',' + std::to_string(i) + ',';
      detail::append_double(s, r.pairs[k][i].first);
      s += ',';
      detail::append_double(s, r.pairs[k][i].second);
      s += '\n';
    }
  out << s;
  require(out.good(), ErrorCategory::io, "failed writing " + path.string());
}

void write_metric_rows(const std::filesystem::path& path, std::span<const MetricRow> rows) {
  auto out = open_report(path);
  std::string s = "case,repeat,MB,MAE\n";
  for (const auto& r : rows) {
    s += r.case_label + ',' + std::to_string(r.repeat) + ',';
    detail::append_double(s, r.mb);
    s += ',';
    detail::append_double(s, r.mae);
    s += '\n';
  }
  out << s;
  require(out.good(), ErrorCategory::io, "failed writing " + path.string());
}

void write_level_bands(const std::filesystem::path& path, std::span<const LevelBand> bands) {
  auto out = open_report(path);
  std::string s = "level,q_low,q_mid,q_high\n";
  for (const auto& b : bands) {
    s += std::to_string(b.level) + ',';
    detail::append_double(s, b.low);
    s += ',';
    detail::append_double(s, b.mid);
    s += ',';
    detail::append_double(s, b.high);
    s += '\n';
  }
  out << s;
  require(out.good(), ErrorCategory::io, "failed writing " + path.string());
}

}  // namespace copaug
