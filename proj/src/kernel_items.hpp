// SPDX-License-Identifier: Apache-2.0
//
// Per-item bodies shared by the serial and parallel kernels.
#pragma once

#include <algorithm>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>

#include "copaug/bicop.hpp"
#include "copaug/error.hpp"
#include "copaug/kernels.hpp"
#include "copaug/rng.hpp"
#include "copaug/special.hpp"

namespace copaug::kernels::detail {

inline void pseudo_column(const DataMatrix& m, std::size_t c, UMatrix& out,
                          std::vector<double>& col, std::vector<double>& ranks) {
  const auto n = m.rows();
  col.resize(n);
  ranks.resize(n);
  for (std::size_t r = 0; r < n; ++r) col[r] = m(r, c);
  average_ranks(col, ranks);
  const double denom = static_cast<double>(n + 1);
  for (std::size_t r = 0; r < n; ++r) out(r, c) = ranks[r] / denom;
}

inline void gaussian_row(const Eigen::MatrixXd& L, std::size_t row, std::uint64_t seed,
                         UMatrix& out, std::vector<double>& z) {
  const auto d = static_cast<std::size_t>(L.rows());
  CounterRng rng(seed, row);
  z.resize(d);
  for (auto& x : z) x = rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j)
      acc += L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * z[j];
    out(row, i) = std::clamp(norm_cdf(acc), kUnitClamp, 1.0 - kUnitClamp);
  }
}

inline void plan_row(const SimulationPlan& plan, std::size_t row, std::uint64_t seed,
                     UMatrix& out, std::vector<double>& slots) {
  CounterRng rng(seed, row);
  slots.assign(plan.slots, 0.0);
  for (const auto& op : plan.ops) {
    switch (op.kind) {
      case SimulationPlan::OpKind::uniform:
        slots[op.dst] = rng.uniform();
        break;
      case SimulationPlan::OpKind::h: {
        const auto& c = plan.copulas[op.copula];
        slots[op.dst] = op.direction == 2 ? h_func(c, slots[op.src], slots[op.cond], 2)
                                          : h_func(c, slots[op.cond], slots[op.src], 1);
        break;
      }
      case SimulationPlan::OpKind::hinv: {
        const auto& c = plan.copulas[op.copula];
        try {
          slots[op.dst] = h_inv(c, slots[op.src], slots[op.cond], op.direction);
        } catch (const Error& e) {
          const auto [tree, edge] = plan.copula_edge[op.copula];
          throw Error(e.category(), std::string(e.what()) + " (tree " +
                                        std::to_string(tree) + ", edge " +
                                        std::to_string(edge) + ")");
        }
        break;
      }
    }
  }
  for (std::size_t j = 0; j < plan.d; ++j) out(row, j) = slots[plan.output[j]];
}

// Pairs (i, j), i < j, whose pointwise envelope contains curve `k`.
inline double band_depth_of(const DataMatrix& curves, std::size_t k) {
  const auto n = curves.rows();
  const auto len = curves.cols();
  const auto f = curves.row(k);
  std::uint64_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto gi = curves.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto gj = curves.row(j);
      bool ok = true;
      for (std::size_t t = 0; t < len && ok; ++t) {
        const double lo = std::min(gi[t], gj[t]);
        const double hi = std::max(gi[t], gj[t]);
        ok = lo <= f[t] && f[t] <= hi;
      }
      inside += ok;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(inside) / pairs;
}

/// Keeps the exception of the lowest failing item so parallel runs report
/// the same error as serial ones.
class FirstError {
 public:
  void capture(std::size_t item, std::exception_ptr e = std::current_exception()) {
    std::lock_guard lock(mu_);
    if (item < item_) {
      item_ = item;
      err_ = std::move(e);
    }
  }
  void rethrow() const {
    if (err_) std::rethrow_exception(err_);
  }

 private:
  std::mutex mu_;
  std::size_t item_ = std::numeric_limits<std::size_t>::max();
  std::exception_ptr err_;
};

inline std::string profile_ctx(std::size_t i) {
  return "profile " + std::to_string(i + 1) + ": ";
}

}  // namespace copaug::kernels::detail
