#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "copaug/error.hpp"
#include "copaug/marginals.hpp"
#include "copaug/rng.hpp"

using namespace copaug;

TEST_CASE("fit_empirical sorts and accepts constant columns") {
  const std::vector<double> v{3, 1, 2};
  const auto m = fit_empirical(v);
  CHECK(m.sorted() == std::vector<double>{1, 2, 3});
  CHECK(m.size() == 3);

  const std::vector<double> c{5, 5, 5};
  const auto k = fit_empirical(c);
  CHECK(k.constant());
  for (double u : {0.01, 0.3, 0.5, 0.99}) CHECK(k.quantile(u) == 5.0);

  std::vector<double> big(10000);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = std::sin(double(i));
  CHECK(fit_empirical(big).size() == 10000);

  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(fit_empirical(one), Error);
  const std::vector<double> nan{1.0, std::nan("")};
  CHECK_THROWS_AS(fit_empirical(nan), Error);
}

TEST_CASE("pseudo_observations examples") {
  const std::vector<double> a{5, 1, 9};
  CHECK(pseudo_observations(a) == std::vector<double>{0.5, 0.25, 0.75});
  const std::vector<double> b{7, 7};
  CHECK(pseudo_observations(b) == std::vector<double>{0.5, 0.5});
  std::vector<double> inc(9);
  for (std::size_t i = 0; i < inc.size(); ++i) inc[i] = double(i) * 2.0 - 3.0;
  const auto u = pseudo_observations(inc);
  for (std::size_t i = 0; i < inc.size(); ++i) CHECK(u[i] == double(i + 1) / 10.0);
}

TEST_CASE("pseudo_observations are invariant to strictly increasing transforms") {
  CounterRng rng(4);
  DataMatrix m(200, 2);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    m(r, 0) = std::floor(rng.normal() * 3.0);  // many ties
    m(r, 1) = rng.normal();
  }
  DataMatrix t = m;
  for (auto& x : t.data()) x = std::exp(x) * 7.0 + 1.0;
  const auto u = pseudo_observations(m);
  CHECK(u.data() == pseudo_observations(t).data());
  for (double x : u.data()) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
  // Without ties, (n+1) u recovers the ranks.
  std::vector<double> col = m.column(1);
  std::vector<double> sorted = col;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto rank = std::lower_bound(sorted.begin(), sorted.end(), col[r]) - sorted.begin() + 1;
    CHECK(std::lround(u(r, 1) * 201.0) == rank);
  }
}

TEST_CASE("cdf and quantile examples") {
  const std::vector<double> v{1, 2, 3};
  const auto m = fit_empirical(v);
  CHECK(m.cdf(2.0) == 0.5);
  CHECK(m.cdf(-10.0) == 0.25);
  CHECK(m.cdf(10.0) == 0.75);
  CHECK(m.cdf(1.5) == 0.375);
  CHECK(m.quantile(0.5) == 2.0);
  CHECK(m.quantile(0.999) == 3.0);
  CHECK(m.quantile(0.001) == 1.0);
  CHECK(m.quantile(0.375) == 1.5);
  CHECK_THROWS_AS(m.quantile(0.0), Error);
  CHECK_THROWS_AS(m.quantile(1.0), Error);
}

TEST_CASE("quantile inverts cdf on the sample range") {
  CounterRng rng(17);
  std::vector<double> v(500);
  for (auto& x : v) x = rng.normal();
  const auto m = fit_empirical(v);
  const double lo = m.sorted().front(), hi = m.sorted().back();
  double prev = 0.0;
  for (int k = 0; k <= 1000; ++k) {
    const double z = lo + (hi - lo) * k / 1000.0;
    const double u = m.cdf(z);
    CHECK(u >= prev);
    prev = u;
    CHECK(std::abs(m.quantile(u) - z) < 1e-12);
  }
}

TEST_CASE("sampling through the quantile reproduces the marginal") {
  CounterRng rng(3);
  std::vector<double> src(10000);
  for (auto& x : src) x = std::exp(rng.normal());
  const auto m = fit_empirical(src);
  CounterRng draw(8);
  std::vector<double> synth(10000);
  for (auto& x : synth) x = m.quantile(draw.uniform());
  CHECK(ks_statistic(src, synth) < 0.03);
  CHECK(ks_statistic(src, src) == 0.0);
}
