// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops. Every kernel exists twice with the same
// signature: `serial` is the reference implementation and `parallel`
// distributes independent items (rows, columns, feature pairs, curves) over
// OpenMP threads. Items never share accumulators, so both variants return
// bitwise-identical results for any thread count.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "copaug/dataset.hpp"
#include "copaug/multicop.hpp"
#include "copaug/radiation.hpp"

namespace copaug::kernels {

/// 1-based average ranks of `x` written to `out`.
void average_ranks(std::span<const double> x, std::span<double> out);

namespace serial {

UMatrix pseudo_observations(const DataMatrix& m);
/// Row-major d x d matrix of pairwise Kendall tau with unit diagonal.
std::vector<double> kendall_tau_matrix(const UMatrix& u);
std::vector<std::vector<double>> radiate(const std::vector<Profile>& profiles,
                                         const RadiationConstants& k);
UMatrix gaussian_rows(const Eigen::MatrixXd& L, std::size_t n, std::uint64_t seed);
UMatrix run_plan(const SimulationPlan& plan, std::size_t n, std::uint64_t seed);
/// Two-curve band depth of every row of `curves`.
std::vector<double> band_depth(const DataMatrix& curves);

}  // namespace serial

namespace parallel {

UMatrix pseudo_observations(const DataMatrix& m);
std::vector<double> kendall_tau_matrix(const UMatrix& u);
std::vector<std::vector<double>> radiate(const std::vector<Profile>& profiles,
                                         const RadiationConstants& k);
UMatrix gaussian_rows(const Eigen::MatrixXd& L, std::size_t n, std::uint64_t seed);
UMatrix run_plan(const SimulationPlan& plan, std::size_t n, std::uint64_t seed);
std::vector<double> band_depth(const DataMatrix& curves);

}  // namespace parallel

/// Number of OpenMP threads the parallel kernels use (1 without OpenMP).
int thread_count();

}  // namespace copaug::kernels
