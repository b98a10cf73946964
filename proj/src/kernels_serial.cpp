// SPDX-License-Identifier: Apache-2.0
#include "kernel_items.hpp"

namespace copaug::kernels {

void average_ranks(std::span<const double> x, std::span<double> out) {
  const auto n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    // Positions i..j-1 (0-based) share the average 1-based rank.
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) out[idx[k]] = avg;
    i = j;
  }
}

namespace serial {

UMatrix pseudo_observations(const DataMatrix& m) {
  UMatrix out(m.rows(), m.cols());
  std::vector<double> col, ranks;
  for (std::size_t c = 0; c < m.cols(); ++c) detail::pseudo_column(m, c, out, col, ranks);
  return out;
}

std::vector<double> kendall_tau_matrix(const UMatrix& u) {
  const auto d = u.cols();
  std::vector<std::vector<double>> cols(d);
  for (std::size_t c = 0; c < d; ++c) cols[c] = u.column(c);
  std::vector<double> tau(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    tau[i * d + i] = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) {
      const double t = kendall_tau(cols[i], cols[j]);
      tau[i * d + j] = t;
      tau[j * d + i] = t;
    }
  }
  return tau;
}

std::vector<std::vector<double>> radiate(const std::vector<Profile>& profiles,
                                         const RadiationConstants& k) {
  std::vector<std::vector<double>> out(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    try {
      out[i] = downwelling_longwave(profiles[i], k);
    } catch (const Error& e) {
      throw Error(e.category(), detail::profile_ctx(i) + e.what());
    }
  }
  return out;
}

UMatrix gaussian_rows(const Eigen::MatrixXd& L, std::size_t n, std::uint64_t seed) {
  UMatrix out(n, static_cast<std::size_t>(L.rows()));
  std::vector<double> z;
  for (std::size_t r = 0; r < n; ++r) detail::gaussian_row(L, r, seed, out, z);
  return out;
}

UMatrix run_plan(const SimulationPlan& plan, std::size_t n, std::uint64_t seed) {
  UMatrix out(n, plan.d);
  std::vector<double> slots;
  for (std::size_t r = 0; r < n; ++r) detail::plan_row(plan, r, seed, out, slots);
  return out;
}

std::vector<double> band_depth(const DataMatrix& curves) {
  std::vector<double> depth(curves.rows());
  for (std::size_t k = 0; k < curves.rows(); ++k) depth[k] = detail::band_depth_of(curves, k);
  return depth;
}

}  // namespace serial
}  // namespace copaug::kernels
