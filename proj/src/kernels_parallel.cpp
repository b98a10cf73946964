// SPDX-License-Identifier: Apache-2.0
#include "kernel_items.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace copaug::kernels {

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

UMatrix pseudo_observations(const DataMatrix& m) {
  UMatrix out(m.rows(), m.cols());
  const auto cols = static_cast<std::int64_t>(m.cols());
#pragma omp parallel
  {
    std::vector<double> col, ranks;
#pragma omp for schedule(dynamic, 4)
    for (std::int64_t c = 0; c < cols; ++c)
      detail::pseudo_column(m, static_cast<std::size_t>(c), out, col, ranks);
  }
  return out;
}

std::vector<double> kendall_tau_matrix(const UMatrix& u) {
  const auto d = u.cols();
  std::vector<std::vector<double>> cols(d);
  for (std::size_t c = 0; c < d; ++c) cols[c] = u.column(c);
  std::vector<double> tau(d * d, 0.0);
  // Flattened upper triangle so the work splits evenly.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(d * (d - 1) / 2);
  for (std::size_t i = 0; i < d; ++i) {
    tau[i * d + i] = 1.0;
    for (std::size_t j = i + 1; j < d; ++j)
      pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  }
  const auto np = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t p = 0; p < np; ++p) {
    const auto [i, j] = pairs[static_cast<std::size_t>(p)];
    const double t = kendall_tau(cols[i], cols[j]);
    tau[i * d + j] = t;
    tau[j * d + i] = t;
  }
  return tau;
}

std::vector<std::vector<double>> radiate(const std::vector<Profile>& profiles,
                                         const RadiationConstants& k) {
  std::vector<std::vector<double>> out(profiles.size());
  detail::FirstError err;
  const auto n = static_cast<std::int64_t>(profiles.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      out[idx] = downwelling_longwave(profiles[idx], k);
    } catch (const Error& e) {
      err.capture(idx, std::make_exception_ptr(
                           Error(e.category(), detail::profile_ctx(idx) + e.what())));
    } catch (...) {
      err.capture(idx);
    }
  }
  err.rethrow();
  return out;
}

UMatrix gaussian_rows(const Eigen::MatrixXd& L, std::size_t n, std::uint64_t seed) {
  UMatrix out(n, static_cast<std::size_t>(L.rows()));
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel
  {
    std::vector<double> z;
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r)
      detail::gaussian_row(L, static_cast<std::size_t>(r), seed, out, z);
  }
  return out;
}

UMatrix run_plan(const SimulationPlan& plan, std::size_t n, std::uint64_t seed) {
  UMatrix out(n, plan.d);
  detail::FirstError err;
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel
  {
    std::vector<double> slots;
#pragma omp for schedule(dynamic, 64)
    for (std::int64_t r = 0; r < rows; ++r) {
      try {
        detail::plan_row(plan, static_cast<std::size_t>(r), seed, out, slots);
      } catch (...) {
        err.capture(static_cast<std::size_t>(r));
      }
    }
  }
  err.rethrow();
  return out;
}

std::vector<double> band_depth(const DataMatrix& curves) {
  std::vector<double> depth(curves.rows());
  const auto n = static_cast<std::int64_t>(curves.rows());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t k = 0; k < n; ++k)
    depth[static_cast<std::size_t>(k)] = detail::band_depth_of(curves, static_cast<std::size_t>(k));
  return depth;
}

}  // namespace parallel
}  // namespace copaug::kernels
