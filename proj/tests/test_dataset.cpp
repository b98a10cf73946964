#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "copaug/dataset.hpp"
#include "copaug/error.hpp"
#include "test_util.hpp"

using namespace copaug;

namespace {

ProfileSet tiny_set() {
  ProfileSet s;
  s.grid.n_full = 3;
  s.profiles.push_back({{200, 250, 290}, {100, 300, 500}, {0, 0.5, 0}});
  s.profiles.push_back({{210, 255, 280}, {120, 310, 520}, {0, 0, 1.25}});
  return s;
}

}  // namespace

TEST_CASE("load_profiles reads a minimal well-formed file") {
  const auto path = test::temp_path("minimal.csv");
  {
    std::ofstream out(path);
    out << "T_1,T_2,T_3,p_1,p_2,p_3,tauc_1,tauc_2,tauc_3\n";
    out << "200,250,290,100,300,500,0,0.5,0\n";
    out << "210,255,280,120,310,520,0,0,1.25\n";
  }
  const auto set = load_profiles(path, LevelGrid{3});
  CHECK(set.size() == 2);
  CHECK(set == tiny_set());
  CHECK_FALSE(set.has_fluxes());
}

TEST_CASE("load_profiles names the row with decreasing pressure") {
  const auto path = test::temp_path("bad_p.csv");
  {
    std::ofstream out(path);
    out << "T_1,T_2,T_3,p_1,p_2,p_3,tauc_1,tauc_2,tauc_3\n";
    out << "200,250,290,100,300,500,0,0,0\n";
    out << "200,250,290,500,300,100,0,0,0\n";
  }
  try {
    load_profiles(path, LevelGrid{3});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::invariant);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("load_profiles rejects schema mismatches and missing columns") {
  const auto path = test::temp_path("schema.csv");
  {
    std::ofstream out(path);
    out << "T_1,T_2,p_1,p_2,tauc_1,tauc_2\n200,250,100,300,0,0\n";
  }
  CHECK_THROWS_AS(load_profiles(path, LevelGrid{3}), Error);
  {
    std::ofstream out(path);
    out << "T_1,T_2,T_3,p_1,p_2,p_3,tauc_1,tauc_2,tauc_3\n200,250,290,100,300,500,0,0\n";
  }
  CHECK_THROWS_AS(load_profiles(path, LevelGrid{3}), Error);
  CHECK_THROWS_AS(load_profiles(test::temp_path("does_not_exist.csv"), LevelGrid{3}), Error);
}

TEST_CASE("save and load round trip is exact, with fluxes") {
  auto set = generate_surrogate(20, LevelGrid{7}, 3);
  DataMatrix y(set.size(), 8);
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) = std::sqrt(double(r * 13 + c) + 0.1);
  attach_fluxes(set, y);
  const auto path = test::temp_path("roundtrip.csv");
  save_profiles(path, set);
  CHECK(load_profiles(path) == set);
  CHECK(load_profiles(path, LevelGrid{7}) == set);
}

TEST_CASE("derive_cloud_optical_depth") {
  const std::vector<double> zero(3, 0.0), r(3, 1e-5), dp(3, 1000.0);
  for (double t : derive_cloud_optical_depth(zero, zero, r, r, dp)) CHECK(t == 0.0);

  const std::vector<double> ql{1e-4}, qi{0.0}, rl{1e-5}, ri{2e-5}, d{1000.0};
  const double tau = derive_cloud_optical_depth(ql, qi, rl, ri, d)[0];
  CHECK(tau == doctest::Approx(1.5 * (1000 / 9.81) * (1e-4 / (1000 * 1e-5))).epsilon(1e-14));
  CHECK(tau == doctest::Approx(1.529).epsilon(1e-3));

  const std::vector<double> ql2{2e-4};
  CHECK(derive_cloud_optical_depth(ql2, qi, rl, ri, d)[0] == doctest::Approx(2 * tau));

  const std::vector<double> qi_only{3e-5}, zero1{0.0};
  const double ice = derive_cloud_optical_depth(zero1, qi_only, rl, ri, d)[0];
  CHECK(ice > 0.0);
  CHECK(derive_cloud_optical_depth(ql, qi_only, rl, ri, d)[0] == doctest::Approx(tau + ice));

  const std::vector<double> bad_r{0.0};
  CHECK_THROWS_AS(derive_cloud_optical_depth(ql, qi, bad_r, ri, d), Error);
  const std::vector<double> neg{-1e-5};
  CHECK_THROWS_AS(derive_cloud_optical_depth(neg, qi, rl, ri, d), Error);
  // A zero radius is fine where there is no condensate of that phase.
  CHECK_NOTHROW(derive_cloud_optical_depth(ql, qi, rl, bad_r, d));
}

TEST_CASE("split_shuffle sizes follow the rounding rule") {
  SplitSpec spec;
  auto s = split_sizes(25000, spec);
  CHECK(s.train == 10000);
  CHECK(s.validation == 5000);
  CHECK(s.test == 10000);
  s = split_sizes(10, spec);
  CHECK(s.train == 4);
  CHECK(s.validation == 2);
  CHECK(s.test == 4);
  CHECK_THROWS_AS(split_sizes(10, SplitSpec{0.6, 0.3, 0.3, 0}), Error);
  CHECK_THROWS_AS(split_sizes(0, spec), Error);
}

TEST_CASE("split_shuffle is deterministic, disjoint and exhaustive") {
  const auto data = generate_surrogate(57, LevelGrid{4}, 11);
  SplitSpec spec;
  spec.seed = 99;
  const auto a = split_shuffle(data, spec);
  const auto b = split_shuffle(data, spec);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.validation.size() + a.test.size() == data.size());

  // Profiles are distinct (continuous noise), so identify them by T_1.
  std::set<double> seen;
  for (const auto* part : {&a.train, &a.validation, &a.test})
    for (const auto& p : part->profiles) CHECK(seen.insert(p.T[0]).second);
  std::set<double> all;
  for (const auto& p : data.profiles) all.insert(p.T[0]);
  CHECK(seen == all);

  spec.seed = 100;
  CHECK_FALSE(split_shuffle(data, spec).train == a.train);
}

TEST_CASE("flatten and unflatten") {
  const auto set = tiny_set();
  const auto x = flatten(set, Which::inputs);
  CHECK(x.rows() == 2);
  CHECK(x.cols() == 9);
  CHECK(x.labels[0].str() == "T_1");
  CHECK(x.labels[3].str() == "p_1");
  CHECK(x.labels[8].str() == "tauc_3");
  CHECK(x(1, 5) == 520);
  CHECK(unflatten(x, set.grid) == set);
  CHECK_THROWS_AS(unflatten(x, LevelGrid{4}), Error);

  const auto big = generate_surrogate(2, LevelGrid{137}, 1);
  CHECK(flatten(big, Which::inputs).cols() == 411);
  CHECK(input_labels(big.grid).size() == 411);
  CHECK(output_labels(big.grid).size() == 138);
  CHECK(unflatten(flatten(big, Which::inputs), big.grid) == big);
}

TEST_CASE("generate_surrogate contract") {
  const LevelGrid grid{20};
  for (std::uint64_t seed : {0ULL, 1ULL, 12345ULL}) {
    const auto one = generate_surrogate(1, grid, seed);
    CHECK(one.size() == 1);
    CHECK_NOTHROW(validate_set(one));
  }
  const auto a = generate_surrogate(30, grid, 5);
  CHECK(a == generate_surrogate(30, grid, 5));
  CHECK_FALSE(a.profiles[0].T == generate_surrogate(30, grid, 6).profiles[0].T);
  CHECK_THROWS_AS(generate_surrogate(0, grid, 5), Error);

  const auto big = generate_surrogate(1000, grid, 8);
  validate_set(big);
  double min_corr = 1.0;
  std::size_t cloudy = 0;
  for (const auto& p : big.profiles)
    cloudy += std::any_of(p.tau_c.begin(), p.tau_c.end(), [](double t) { return t > 0; });
  for (std::size_t i = 0; i + 1 < grid.n_full; ++i) {
    std::vector<double> x, y;
    for (const auto& p : big.profiles) {
      x.push_back(p.T[i]);
      y.push_back(p.T[i + 1]);
    }
    min_corr = std::min(min_corr, test::pearson(x, y));
  }
  CHECK(min_corr > 0.5);
  CHECK(cloudy > 300);
  CHECK(cloudy < 500);
  const auto& top = big.profiles[0];
  CHECK(top.T.front() < top.T.back());
}
