// SPDX-License-Identifier: Apache-2.0
//
// Parametric bivariate copulas: densities, conditional distribution
// functions (h-functions) and their inverses, Kendall's tau, tau/parameter
// conversion, likelihood refinement and AIC family selection.
//
// h-function convention: h_func(c, u, v, 2) = dC/dv = P(U <= u | V = v) and
// h_func(c, u, v, 1) = dC/du = P(V <= v | U = u). h_inv inverts in the
// conditioned argument: for direction 2 it returns u given (w, v); for
// direction 1 it returns v given (w, u).
//
// Rotations reflect one or both arguments:
//   90:  C(u,v) = v - C0(1-u, v)         c(u,v) = c0(1-u, v)
//   180: C(u,v) = u + v - 1 + C0(1-u,1-v) c(u,v) = c0(1-u, 1-v)
//   270: C(u,v) = u - C0(u, 1-v)         c(u,v) = c0(u, 1-v)
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace copaug {

enum class Family { independence, gaussian, student, clayton, gumbel, frank, joe };

std::string_view to_string(Family f) noexcept;
std::optional<Family> family_from_string(std::string_view name) noexcept;
/// All seven families in declaration order.
std::vector<Family> all_families();

/// Clayton, Gumbel and Joe admit 90/180/270 rotations; the others are 0 only.
bool rotatable(Family f) noexcept;

inline constexpr double kUnitClamp = 1e-10;
/// Student t degrees of freedom tried during fitting.
inline constexpr double kStudentNuGrid[] = {2, 3, 4, 6, 10, 20, 30};

struct PairCopula {
  Family family = Family::independence;
  int rotation = 0;    // degrees: 0, 90, 180 or 270
  double theta = 0.0;  // rho for gaussian/student
  double nu = 0.0;     // student only
  double loglik = 0.0;

  int n_params() const noexcept;
  double aic() const noexcept { return 2.0 * n_params() - 2.0 * loglik; }
  /// Kendall's tau implied by the parameters, including rotation sign.
  double tau() const;

  friend bool operator==(const PairCopula&, const PairCopula&) = default;
};

/// Throws Error(domain) unless the family, rotation and parameters are valid.
void validate(const PairCopula& c);

PairCopula make_pair(Family f, double theta, int rotation = 0, double nu = 0.0);

double pair_pdf(const PairCopula& c, double u, double v);
double pair_log_pdf(const PairCopula& c, double u, double v);
/// Copula distribution function; closed form for every family except the
/// Student t (numerical integration of the bivariate t density).
double pair_cdf(const PairCopula& c, double u, double v);
double h_func(const PairCopula& c, double u, double v, int direction);
/// Throws Error(convergence) when the bracketed root search fails.
double h_inv(const PairCopula& c, double w, double cond, int direction);

double pair_loglik(const PairCopula& c, std::span<const double> u,
                   std::span<const double> v);

/// Tau-b with tie correction, O(n log n) merge counting.
double kendall_tau(std::span<const double> u, std::span<const double> v);

/// Unrotated family parameter for a tau within the family's range
/// (Clayton/Gumbel/Joe need tau > 0; Independence needs tau == 0).
double tau_to_param(Family f, double tau);
double param_to_tau(Family f, double theta);

/// |tau| below this selects Independence (5 % asymptotic test of tau = 0).
double independence_threshold(std::size_t n);

struct FitOptions {
  std::vector<Family> catalogue = all_families();
  bool independence_test = true;
};

/// AIC selection over the catalogue with tau-inversion starts and a golden
/// section refinement of the main parameter. Throws Error(fit) on degenerate
/// input.
PairCopula fit_pair(std::span<const double> u, std::span<const double> v,
                    const FitOptions& opts = {});

/// (u, v) pairs with v, w iid uniform and u = h_inv(w, v).
std::vector<std::pair<double, double>> sample_pair(const PairCopula& c, std::size_t n,
                                                   std::uint64_t seed);

}  // namespace copaug
