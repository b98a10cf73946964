// SPDX-License-Identifier: Apache-2.0
//
// Real-versus-synthetic comparisons (random projections, band depth) and
// emulator error metrics, with delimited-text writers for each report.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copaug/dataset.hpp"

namespace copaug {

enum class Statistic { mean, variance, std, q10, q50, q90 };
inline constexpr std::array<Statistic, 6> kStatistics{Statistic::mean, Statistic::variance,
                                                      Statistic::std,  Statistic::q10,
                                                      Statistic::q50,  Statistic::q90};
std::string_view to_string(Statistic s) noexcept;

/// Linear-interpolation quantile of sorted values (numpy's default rule).
double quantile_sorted(std::span<const double> sorted, double q);

struct ProjectionReport {
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  /// pairs[s][i] = (statistic s of real projection, of synthetic projection)
  /// in iteration i.
  std::array<std::vector<std::pair<double, double>>, kStatistics.size()> pairs;
};

/// Each iteration projects both matrices onto the same standard-normal
/// weight vector and summarizes the two projections.
ProjectionReport random_projection_report(const DataMatrix& real, const DataMatrix& synth,
                                          std::size_t iters = 100, std::uint64_t seed = 0);

/// Summary of one projection; sorts the values first so the result does not
/// depend on row order.
std::array<double, kStatistics.size()> projection_statistics(std::vector<double> p);

/// Band depth with two-curve bands; curves are the rows of `curves`.
std::vector<double> band_depth(const DataMatrix& curves);

enum class DepthGroup { central, middle, outer };

struct DepthRanking {
  std::vector<double> depths;
  std::vector<std::size_t> order;  // curve indices, deepest first
  std::vector<DepthGroup> group;   // per curve
  std::size_t median = 0;          // deepest curve
};

DepthRanking depth_groups(std::span<const double> depths);

struct LevelBand {
  std::size_t level = 0;
  double low = 0.0, mid = 0.0, high = 0.0;
};

/// Pointwise envelope of the deepest `fraction` of the curves, with the
/// median curve as the middle line.
std::vector<LevelBand> depth_envelope(const DataMatrix& curves, const DepthRanking& ranking,
                                      double fraction);

struct ErrorMetrics {
  double mb = 0.0;
  double mae = 0.0;
  /// Per column of y: 10, 50 and 90 % quantiles of y_true - y_pred.
  std::vector<LevelBand> per_level;
};

ErrorMetrics error_metrics(const DataMatrix& y_true, const DataMatrix& y_pred);

struct MetricRow {
  std::string case_label;
  std::size_t repeat = 0;
  double mb = 0.0;
  double mae = 0.0;
};

void write_projection_report(const std::filesystem::path& path, const ProjectionReport& r);
void write_metric_rows(const std::filesystem::path& path, std::span<const MetricRow> rows);
void write_level_bands(const std::filesystem::path& path, std::span<const LevelBand> bands);

}  // namespace copaug
