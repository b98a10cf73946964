// SPDX-License-Identifier: Apache-2.0
#include "copaug/bicop.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "copaug/error.hpp"
#include "copaug/rng.hpp"
#include "copaug/special.hpp"

namespace copaug {

namespace {

constexpr double kEllipticalTauMax = 0.97;
constexpr double kArchimedeanTauMax = 0.95;
constexpr double kArchimedeanTauMin = 1e-3;
constexpr double kBracketHalfWidth = 0.5;  // refinement bracket in tau space

double clamp_unit(double x) { return std::clamp(x, kUnitClamp, 1.0 - kUnitClamp); }

// log(e^a + e^b - 1) for a, b >= 0.
double log_sum_minus_one(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m) - std::exp(-m));
}

// ---------------------------------------------------------------------
// Unrotated families. All are exchangeable, so dC0/du(u, v) equals
// dC0/dv(v, u) and one h-function per family suffices.

struct Params {
  Family family;
  double theta;
  double nu;
};

double log_pdf0(const Params& p, double u, double v) {
  const double th = p.theta;
  switch (p.family) {
    case Family::independence:
      return 0.0;
    case Family::gaussian: {
      const double x = norm_quantile(u), y = norm_quantile(v);
      const double r2 = 1.0 - th * th;
      return -0.5 * std::log(r2) - (th * th * (x * x + y * y) - 2.0 * th * x * y) / (2.0 * r2);
    }
    case Family::student: {
      const double nu = p.nu;
      const double x = t_quantile(u, nu), y = t_quantile(v, nu);
      const double r2 = 1.0 - th * th;
      const double q = (x * x - 2.0 * th * x * y + y * y) / (nu * r2);
      const double log_joint = std::lgamma(0.5 * (nu + 2.0)) - std::lgamma(0.5 * nu) -
                               std::log(nu * std::numbers::pi) - 0.5 * std::log(r2) -
                               0.5 * (nu + 2.0) * std::log1p(q);
      return log_joint - t_log_pdf(x, nu) - t_log_pdf(y, nu);
    }
    case Family::clayton: {
      const double lu = std::log(u), lv = std::log(v);
      const double l = log_sum_minus_one(-th * lu, -th * lv);
      return std::log1p(th) - (1.0 + th) * (lu + lv) - (2.0 + 1.0 / th) * l;
    }
    case Family::gumbel: {
      const double x = -std::log(u), y = -std::log(v);
      const double lx = std::log(x), ly = std::log(y);
      // log S with S = x^th + y^th
      const double a = th * lx, b = th * ly;
      const double m = std::max(a, b);
      const double log_s = m + std::log(std::exp(a - m) + std::exp(b - m));
      const double big_a = std::exp(log_s / th);
      return -big_a + x + y + (th - 1.0) * (lx + ly) + (1.0 / th - 2.0) * log_s +
             std::log(big_a + th - 1.0);
    }
    case Family::frank: {
      const double a = std::expm1(-th * u), b = std::expm1(-th * v), k = std::expm1(-th);
      const double den = k + a * b;
      return std::log(-th * k) - th * (u + v) - 2.0 * std::log(std::abs(den));
    }
    case Family::joe: {
      const double lub = std::log1p(-u), lvb = std::log1p(-v);
      const double a = std::exp(th * lub), b = std::exp(th * lvb);
      const double s = a + b - a * b;
      return (1.0 / th - 2.0) * std::log(s) + (th - 1.0) * (lub + lvb) +
             std::log(th - 1.0 + s);
    }
  }
  return 0.0;
}

// dC0/dv(u, v) = P(U <= u | V = v)
double h0(const Params& p, double u, double v) {
  const double th = p.theta;
  switch (p.family) {
    case Family::independence:
      return u;
    case Family::gaussian: {
      const double x = norm_quantile(u), y = norm_quantile(v);
      return norm_cdf((x - th * y) / std::sqrt(1.0 - th * th));
    }
    case Family::student: {
      const double nu = p.nu;
      const double x = t_quantile(u, nu), y = t_quantile(v, nu);
      const double scale = std::sqrt((nu + y * y) * (1.0 - th * th) / (nu + 1.0));
      return t_cdf((x - th * y) / scale, nu + 1.0);
    }
    case Family::clayton: {
      const double lu = std::log(u), lv = std::log(v);
      const double l = log_sum_minus_one(-th * lu, -th * lv);
      return std::exp((-th - 1.0) * lv - (1.0 + 1.0 / th) * l);
    }
    case Family::gumbel: {
      const double x = -std::log(u), y = -std::log(v);
      const double a = th * std::log(x), b = th * std::log(y);
      const double m = std::max(a, b);
      const double log_s = m + std::log(std::exp(a - m) + std::exp(b - m));
      const double big_a = std::exp(log_s / th);
      return std::exp(-big_a + y + (th - 1.0) * std::log(y) + (1.0 - th) * log_s / th);
    }
    case Family::frank: {
      const double a = std::expm1(-th * u), b = std::expm1(-th * v), k = std::expm1(-th);
      return (b + 1.0) * a / (k + a * b);
    }
    case Family::joe: {
      const double lub = std::log1p(-u), lvb = std::log1p(-v);
      const double a = std::exp(th * lub), b = std::exp(th * lvb);
      const double s = a + b - a * b;
      return std::exp((1.0 / th - 1.0) * std::log(s) + (th - 1.0) * lvb) * (1.0 - a);
    }
  }
  return u;
}

double hinv_numeric(const Params& p, double w, double v) {
  const double lo = kUnitClamp, hi = 1.0 - kUnitClamp;
  auto f = [&](double u) { return h0(p, u, v) - w; };
  const double flo = f(lo), fhi = f(hi);
  if (flo >= 0.0) return lo;
  if (fhi <= 0.0) return hi;
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), iters);
  if (iters >= 200)
    fail(ErrorCategory::convergence,
         "h-inverse did not converge for " + std::string(to_string(p.family)) +
             " theta=" + std::to_string(p.theta));
  // Pick the bracket end with the smaller residual.
  return std::abs(f(a)) <= std::abs(f(b)) ? a : b;
}

// Solves h0(u, v) = w for u.
double hinv0(const Params& p, double w, double v) {
  const double th = p.theta;
  switch (p.family) {
    case Family::independence:
      return w;
    case Family::gaussian: {
      const double y = norm_quantile(v);
      return norm_cdf(norm_quantile(w) * std::sqrt(1.0 - th * th) + th * y);
    }
    case Family::student: {
      const double nu = p.nu;
      const double y = t_quantile(v, nu);
      const double scale = std::sqrt((nu + y * y) * (1.0 - th * th) / (nu + 1.0));
      return t_cdf(t_quantile(w, nu + 1.0) * scale + th * y, nu);
    }
    case Family::clayton: {
      // u^-th = 1 + v^-th (w^(-th/(1+th)) - 1)
      const double e = std::expm1(-th / (1.0 + th) * std::log(w));
      const double s = -th * std::log(v) + std::log(e);
      const double log_u_pow = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
      return std::exp(-log_u_pow / th);
    }
    case Family::frank: {
      const double b = std::expm1(-th * v), k = std::expm1(-th);
      const double a = w * k / ((b + 1.0) - w * b);
      return -std::log1p(a) / th;
    }
    case Family::gumbel:
    case Family::joe:
      return hinv_numeric(p, w, v);
  }
  return w;
}

double cdf0(const Params& p, double u, double v) {
  const double th = p.theta;
  switch (p.family) {
    case Family::independence:
      return u * v;
    case Family::gaussian: {
      // Plackett: dPhi2/drho = phi2(x, y; rho).
      const double x = norm_quantile(u), y = norm_quantile(v);
      auto integrand = [&](double r) {
        const double r2 = 1.0 - r * r;
        return std::exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * r2)) /
               (2.0 * std::numbers::pi * std::sqrt(r2));
      };
      const double integral =
          th == 0.0 ? 0.0
                    : boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                          integrand, 0.0, th, 15, 1e-14);
      return u * v + integral;
    }
    case Family::student: {
      // C(u, v) = integral over s in (0, v) of dC/dv(u, s).
      auto integrand = [&](double s) { return h0(p, u, clamp_unit(s)); };
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          integrand, 0.0, v, 15, 1e-12);
    }
    case Family::clayton: {
      const double l = log_sum_minus_one(-th * std::log(u), -th * std::log(v));
      return std::exp(-l / th);
    }
    case Family::gumbel: {
      const double x = -std::log(u), y = -std::log(v);
      return std::exp(-std::pow(std::pow(x, th) + std::pow(y, th), 1.0 / th));
    }
    case Family::frank: {
      const double a = std::expm1(-th * u), b = std::expm1(-th * v), k = std::expm1(-th);
      return -std::log1p(a * b / k) / th;
    }
    case Family::joe: {
      const double a = std::pow(1.0 - u, th), b = std::pow(1.0 - v, th);
      return 1.0 - std::pow(a + b - a * b, 1.0 / th);
    }
  }
  return u * v;
}

Params params_of(const PairCopula& c) { return {c.family, c.theta, c.nu}; }

double clamp_h(double h) { return std::clamp(h, kUnitClamp, 1.0 - kUnitClamp); }

// Frank: tau = 1 - 4/theta + 4 D1(theta)/theta with the Debye function D1.
double frank_tau(double theta) {
  const double a = std::abs(theta);
  if (a < 1e-4) return theta / 9.0;
  auto integrand = [](double t) { return t == 0.0 ? 1.0 : t / std::expm1(t); };
  const double d1 =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, a, 15,
                                                                    1e-14) /
      a;
  const double tau = 1.0 - 4.0 / a + 4.0 * d1 / a;
  return theta < 0 ? -tau : tau;
}

// Joe: tau = 1 + 2/(2 - theta) (psi(2) - psi(2/theta + 1)).
double joe_tau(double theta) {
  if (std::abs(theta - 2.0) < 1e-6) return 1.0 - boost::math::trigamma(2.0);
  return 1.0 + 2.0 / (2.0 - theta) *
                   (boost::math::digamma(2.0) - boost::math::digamma(2.0 / theta + 1.0));
}

template <class F>
double invert_monotone(F tau_of, double target, double lo, double hi) {
  auto f = [&](double x) { return tau_of(x) - target; };
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (a + b);
}

}  // namespace

std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::independence: return "independence";
    case Family::gaussian: return "gaussian";
    case Family::student: return "student";
    case Family::clayton: return "clayton";
    case Family::gumbel: return "gumbel";
    case Family::frank: return "frank";
    case Family::joe: return "joe";
  }
  return "independence";
}

std::optional<Family> family_from_string(std::string_view name) noexcept {
  for (auto f : all_families())
    if (to_string(f) == name) return f;
  return std::nullopt;
}

std::vector<Family> all_families() {
  return {Family::independence, Family::gaussian, Family::student, Family::clayton,
          Family::gumbel,       Family::frank,    Family::joe};
}

bool rotatable(Family f) noexcept {
  return f == Family::clayton || f == Family::gumbel || f == Family::joe;
}

int PairCopula::n_params() const noexcept {
  switch (family) {
    case Family::independence: return 0;
    case Family::student: return 2;
    default: return 1;
  }
}

double PairCopula::tau() const {
  const double t = param_to_tau(family, theta);
  return (rotation == 90 || rotation == 270) ? -t : t;
}

void validate(const PairCopula& c) {
  require(c.rotation == 0 || c.rotation == 90 || c.rotation == 180 || c.rotation == 270,
          ErrorCategory::domain, "rotation must be 0, 90, 180 or 270");
  require(c.rotation == 0 || rotatable(c.family), ErrorCategory::domain,
          std::string(to_string(c.family)) + " copula only supports rotation 0");
  require(std::isfinite(c.theta), ErrorCategory::domain, "copula parameter not finite");
  switch (c.family) {
    case Family::independence:
      break;
    case Family::gaussian:
      require(std::abs(c.theta) < 1.0, ErrorCategory::domain, "gaussian rho must lie in (-1, 1)");
      break;
    case Family::student:
      require(std::abs(c.theta) < 1.0, ErrorCategory::domain, "student rho must lie in (-1, 1)");
      require(c.nu >= 2.0, ErrorCategory::domain, "student nu must be >= 2");
      break;
    case Family::clayton:
      require(c.theta > 0.0, ErrorCategory::domain, "clayton theta must be > 0");
      break;
    case Family::gumbel:
      require(c.theta >= 1.0, ErrorCategory::domain, "gumbel theta must be >= 1");
      break;
    case Family::frank:
      require(c.theta != 0.0, ErrorCategory::domain, "frank theta must be nonzero");
      break;
    case Family::joe:
      require(c.theta >= 1.0, ErrorCategory::domain, "joe theta must be >= 1");
      break;
  }
}

PairCopula make_pair(Family f, double theta, int rotation, double nu) {
  PairCopula c{f, rotation, theta, nu, 0.0};
  validate(c);
  return c;
}

double pair_log_pdf(const PairCopula& c, double u, double v) {
  u = clamp_unit(u);
  v = clamp_unit(v);
  const auto p = params_of(c);
  switch (c.rotation) {
    case 90: return log_pdf0(p, 1.0 - u, v);
    case 180: return log_pdf0(p, 1.0 - u, 1.0 - v);
    case 270: return log_pdf0(p, u, 1.0 - v);
    default: return log_pdf0(p, u, v);
  }
}

double pair_pdf(const PairCopula& c, double u, double v) {
  return std::exp(pair_log_pdf(c, u, v));
}

double pair_cdf(const PairCopula& c, double u, double v) {
  u = clamp_unit(u);
  v = clamp_unit(v);
  const auto p = params_of(c);
  switch (c.rotation) {
    case 90: return v - cdf0(p, 1.0 - u, v);
    case 180: return u + v - 1.0 + cdf0(p, 1.0 - u, 1.0 - v);
    case 270: return u - cdf0(p, u, 1.0 - v);
    default: return cdf0(p, u, v);
  }
}

double h_func(const PairCopula& c, double u, double v, int direction) {
  require(direction == 1 || direction == 2, ErrorCategory::domain, "h direction must be 1 or 2");
  u = clamp_unit(u);
  v = clamp_unit(v);
  const auto p = params_of(c);
  double h = 0.0;
  if (direction == 2) {
    switch (c.rotation) {
      case 90: h = 1.0 - h0(p, 1.0 - u, v); break;
      case 180: h = 1.0 - h0(p, 1.0 - u, 1.0 - v); break;
      case 270: h = h0(p, u, 1.0 - v); break;
      default: h = h0(p, u, v); break;
    }
  } else {
    switch (c.rotation) {
      case 90: h = h0(p, v, 1.0 - u); break;
      case 180: h = 1.0 - h0(p, 1.0 - v, 1.0 - u); break;
      case 270: h = 1.0 - h0(p, 1.0 - v, u); break;
      default: h = h0(p, v, u); break;
    }
  }
  return clamp_h(h);
}

double h_inv(const PairCopula& c, double w, double cond, int direction) {
  require(direction == 1 || direction == 2, ErrorCategory::domain, "h direction must be 1 or 2");
  w = clamp_unit(w);
  cond = clamp_unit(cond);
  const auto p = params_of(c);
  double x = 0.0;
  if (direction == 2) {
    switch (c.rotation) {
      case 90: x = 1.0 - hinv0(p, 1.0 - w, cond); break;
      case 180: x = 1.0 - hinv0(p, 1.0 - w, 1.0 - cond); break;
      case 270: x = hinv0(p, w, 1.0 - cond); break;
      default: x = hinv0(p, w, cond); break;
    }
  } else {
    switch (c.rotation) {
      case 90: x = hinv0(p, w, 1.0 - cond); break;
      case 180: x = 1.0 - hinv0(p, 1.0 - w, 1.0 - cond); break;
      case 270: x = 1.0 - hinv0(p, 1.0 - w, cond); break;
      default: x = hinv0(p, w, cond); break;
    }
  }
  return clamp_h(x);
}

double pair_loglik(const PairCopula& c, std::span<const double> u,
                   std::span<const double> v) {
  if (c.family == Family::independence) return 0.0;
  double ll = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) ll += pair_log_pdf(c, u[i], v[i]);
  return ll;
}

// ---------------------------------------------------------------------
// Kendall's tau-b (Knight's algorithm).

namespace {

// Sorts `v` ascending by merge sort and returns the number of swaps
// (discordant pair count for the pre-sorted first coordinate).
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf,
                          std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

std::uint64_t tied_pairs_sorted(const std::vector<double>& x) {
  std::uint64_t t = 0, run = 1;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    if (i < x.size() && x[i] == x[i - 1]) {
      ++run;
    } else {
      t += run * (run - 1) / 2;
      run = 1;
    }
  }
  return t;
}

}  // namespace

double kendall_tau(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCategory::domain, "kendall_tau needs equal lengths");
  const std::size_t n = u.size();
  require(n >= 2, ErrorCategory::domain, "kendall_tau needs at least two pairs");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return u[a] < u[b] || (u[a] == u[b] && v[a] < v[b]);
  });
  std::vector<double> vs(n);
  for (std::size_t i = 0; i < n; ++i) vs[i] = v[idx[i]];

  // Ties in u and joint ties.
  std::uint64_t tu = 0, tuv = 0;
  {
    std::uint64_t run = 1, jrun = 1;
    for (std::size_t i = 1; i <= n; ++i) {
      const bool same_u = i < n && u[idx[i]] == u[idx[i - 1]];
      if (same_u) {
        ++run;
        if (vs[i] == vs[i - 1])
          ++jrun;
        else {
          tuv += jrun * (jrun - 1) / 2;
          jrun = 1;
        }
      } else {
        tu += run * (run - 1) / 2;
        tuv += jrun * (jrun - 1) / 2;
        run = 1;
        jrun = 1;
      }
    }
  }
  std::vector<double> buf(n);
  const std::uint64_t swaps = merge_count(vs, buf, 0, n);
  const std::uint64_t tv = tied_pairs_sorted(vs);
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const double num = static_cast<double>(n0) - static_cast<double>(tu) -
                     static_cast<double>(tv) + static_cast<double>(tuv) -
                     2.0 * static_cast<double>(swaps);
  const double den = std::sqrt(static_cast<double>(n0 - tu) * static_cast<double>(n0 - tv));
  if (den == 0.0) return 0.0;
  return std::clamp(num / den, -1.0, 1.0);
}

// ---------------------------------------------------------------------

double param_to_tau(Family f, double theta) {
  switch (f) {
    case Family::independence: return 0.0;
    case Family::gaussian:
    case Family::student: return 2.0 / std::numbers::pi * std::asin(theta);
    case Family::clayton: return theta / (theta + 2.0);
    case Family::gumbel: return 1.0 - 1.0 / theta;
    case Family::frank: return frank_tau(theta);
    case Family::joe: return joe_tau(theta);
  }
  return 0.0;
}

double tau_to_param(Family f, double tau) {
  require(std::abs(tau) < 1.0, ErrorCategory::domain, "tau must lie in (-1, 1)");
  switch (f) {
    case Family::independence:
      require(tau == 0.0, ErrorCategory::domain, "independence requires tau = 0");
      return 0.0;
    case Family::gaussian:
    case Family::student:
      return std::sin(std::numbers::pi * tau / 2.0);
    case Family::clayton:
      require(tau > 0.0, ErrorCategory::domain, "clayton requires tau > 0");
      return 2.0 * tau / (1.0 - tau);
    case Family::gumbel:
      require(tau >= 0.0, ErrorCategory::domain, "gumbel requires tau >= 0");
      return 1.0 / (1.0 - tau);
    case Family::frank: {
      require(tau != 0.0, ErrorCategory::domain, "frank requires tau != 0");
      const double a = std::abs(tau);
      if (a < 1e-6) return 9.0 * tau;
      const double th = invert_monotone(frank_tau, a, 1e-5, 1e3);
      return tau < 0 ? -th : th;
    }
    case Family::joe:
      require(tau >= 0.0, ErrorCategory::domain, "joe requires tau >= 0");
      if (tau == 0.0) return 1.0;
      return invert_monotone(joe_tau, tau, 1.0, 1e3);
  }
  return 0.0;
}

double independence_threshold(std::size_t n) {
  const double nd = static_cast<double>(n);
  return 1.96 * std::sqrt(2.0 * (2.0 * nd + 5.0) / (9.0 * nd * (nd - 1.0)));
}

// ---------------------------------------------------------------------
// Fitting.

namespace {

// Maximizes f on [a, b] by golden-section search.
template <class F>
std::pair<double, double> golden_max(F f, double a, double b) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 100 && (b - a) > 1e-7 * (1.0 + std::abs(c)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? std::pair{c, fc} : std::pair{d, fd};
}

double safe_loglik(const PairCopula& c, std::span<const double> u,
                   std::span<const double> v) {
  const double ll = pair_loglik(c, u, v);
  return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
}

// Refines the single parameter of `base` between the parameters implied by
// tau_lo and tau_hi (unrotated, same sign) using `objective(theta)`.
template <class Objective>
PairCopula refine(PairCopula base, double tau_start, double tau_lo, double tau_hi,
                  Objective objective) {
  const Family f = base.family;
  const double lo = tau_to_param(f, tau_lo);
  const double hi = tau_to_param(f, tau_hi);
  base.theta = tau_to_param(f, tau_start);
  double best_ll = objective(base.theta);
  if (!std::isfinite(best_ll)) best_ll = -std::numeric_limits<double>::infinity();
  auto [th, ll] = golden_max(objective, std::min(lo, hi), std::max(lo, hi));
  if (std::isfinite(ll) && ll > best_ll) {
    base.theta = th;
    best_ll = ll;
  }
  base.loglik = best_ll;
  return base;
}

PairCopula refine_generic(PairCopula base, double tau_start, double tau_lo, double tau_hi,
                          std::span<const double> u, std::span<const double> v) {
  auto objective = [&](double th) {
    PairCopula c = base;
    c.theta = th;
    return safe_loglik(c, u, v);
  };
  return refine(base, tau_start, tau_lo, tau_hi, objective);
}

// Gaussian log-likelihood depends on the scores only through three sums.
PairCopula refine_gaussian(double tau_start, double tau_lo, double tau_hi,
                           std::span<const double> u, std::span<const double> v) {
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = norm_quantile(clamp_unit(u[i])), y = norm_quantile(clamp_unit(v[i]));
    sxx += x * x + y * y;
    sxy += x * y;
  }
  const double n = static_cast<double>(u.size());
  auto objective = [&](double r) {
    const double r2 = 1.0 - r * r;
    return -0.5 * n * std::log(r2) - (r * r * sxx - 2.0 * r * sxy) / (2.0 * r2);
  };
  return refine(PairCopula{Family::gaussian, 0, 0.0, 0.0, 0.0}, tau_start, tau_lo, tau_hi,
                objective);
}

PairCopula refine_student(double nu, double tau_start, double tau_lo, double tau_hi,
                          std::span<const double> u, std::span<const double> v) {
  const std::size_t n = u.size();
  std::vector<double> x(n), y(n);
  double marginal = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = t_quantile(clamp_unit(u[i]), nu);
    y[i] = t_quantile(clamp_unit(v[i]), nu);
    marginal += t_log_pdf(x[i], nu) + t_log_pdf(y[i], nu);
  }
  const double nd = static_cast<double>(n);
  const double norm = std::lgamma(0.5 * (nu + 2.0)) - std::lgamma(0.5 * nu) -
                      std::log(nu * std::numbers::pi);
  auto objective = [&](double r) {
    const double r2 = 1.0 - r * r;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += std::log1p((x[i] * x[i] - 2.0 * r * x[i] * y[i] + y[i] * y[i]) / (nu * r2));
    return nd * (norm - 0.5 * std::log(r2)) - 0.5 * (nu + 2.0) * acc - marginal;
  };
  return refine(PairCopula{Family::student, 0, 0.0, nu, 0.0}, tau_start, tau_lo, tau_hi,
                objective);
}

void consider(std::optional<PairCopula>& best, const PairCopula& cand) {
  if (!std::isfinite(cand.loglik)) return;
  if (!best || cand.aic() < best->aic()) best = cand;
}

}  // namespace

PairCopula fit_pair(std::span<const double> u, std::span<const double> v,
                    const FitOptions& opts) {
  require(u.size() == v.size(), ErrorCategory::fit, "fit_pair needs equal lengths");
  require(u.size() >= 10, ErrorCategory::fit, "fit_pair needs at least 10 observations");
  require(!opts.catalogue.empty(), ErrorCategory::fit, "empty family catalogue");
  for (std::size_t i = 0; i < u.size(); ++i)
    require(u[i] > 0.0 && u[i] < 1.0 && v[i] > 0.0 && v[i] < 1.0, ErrorCategory::fit,
            "fit_pair needs pseudo-observations in (0, 1)");
  auto constant = [](std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double a) { return a == x[0]; });
  };
  require(!constant(u) && !constant(v), ErrorCategory::fit,
          "fit_pair input has a constant column");

  const double tau_hat = kendall_tau(u, v);
  if (opts.independence_test && std::abs(tau_hat) < independence_threshold(u.size()))
    return PairCopula{};

  std::optional<PairCopula> best;
  for (Family f : opts.catalogue) {
    switch (f) {
      case Family::independence:
        consider(best, PairCopula{});
        break;
      case Family::gaussian: {
        const double t0 = std::clamp(tau_hat, -kEllipticalTauMax, kEllipticalTauMax);
        const double lo = std::max(-kEllipticalTauMax, t0 - kBracketHalfWidth);
        const double hi = std::min(kEllipticalTauMax, t0 + kBracketHalfWidth);
        consider(best, refine_gaussian(t0, lo, hi, u, v));
        break;
      }
      case Family::student: {
        const double t0 = std::clamp(tau_hat, -kEllipticalTauMax, kEllipticalTauMax);
        const double lo = std::max(-kEllipticalTauMax, t0 - kBracketHalfWidth);
        const double hi = std::min(kEllipticalTauMax, t0 + kBracketHalfWidth);
        for (double nu : kStudentNuGrid)
          consider(best, refine_student(nu, t0, lo, hi, u, v));
        break;
      }
      case Family::frank: {
        const double a = std::clamp(std::abs(tau_hat), kArchimedeanTauMin, kArchimedeanTauMax);
        const double lo = std::max(kArchimedeanTauMin, a - kBracketHalfWidth);
        const double hi = std::min(kArchimedeanTauMax, a + kBracketHalfWidth);
        const double s = tau_hat < 0 ? -1.0 : 1.0;
        consider(best, refine_generic(PairCopula{f, 0, 0.0, 0.0, 0.0}, s * a, s * lo, s * hi, u, v));
        break;
      }
      case Family::clayton:
      case Family::gumbel:
      case Family::joe: {
        const double a = std::clamp(std::abs(tau_hat), kArchimedeanTauMin, kArchimedeanTauMax);
        const double lo = std::max(kArchimedeanTauMin, a - kBracketHalfWidth);
        const double hi = std::min(kArchimedeanTauMax, a + kBracketHalfWidth);
        const std::array<int, 2> rotations =
            tau_hat >= 0 ? std::array{0, 180} : std::array{90, 270};
        for (int rot : rotations)
          consider(best, refine_generic(PairCopula{f, rot, 0.0, 0.0, 0.0}, a, lo, hi, u, v));
        break;
      }
    }
  }
  require(best.has_value(), ErrorCategory::fit, "no candidate family produced a finite fit");
  best->loglik = pair_loglik(*best, u, v);
  return *best;
}

std::vector<std::pair<double, double>> sample_pair(const PairCopula& c, std::size_t n,
                                                   std::uint64_t seed) {
  validate(c);
  std::vector<std::pair<double, double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    const double v = rng.uniform();
    const double w = rng.uniform();
    out[i] = {h_inv(c, w, v, 2), v};
  }
  return out;
}

}  // namespace copaug
