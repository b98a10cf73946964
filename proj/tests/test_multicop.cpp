#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "copaug/error.hpp"
#include "copaug/kernels.hpp"
#include "copaug/multicop.hpp"
#include "copaug/rng.hpp"
#include "copaug/special.hpp"
#include "test_util.hpp"

using namespace copaug;

namespace {

UMatrix independent_uniforms(std::size_t n, std::size_t d, std::uint64_t seed) {
  UMatrix u(n, d);
  CounterRng rng(seed);
  for (auto& x : u.data()) x = rng.uniform();
  return u;
}

Eigen::MatrixXd corr2(double rho) {
  Eigen::MatrixXd R(2, 2);
  R << 1, rho, rho, 1;
  return R;
}

double tau_of(const UMatrix& u, std::size_t a, std::size_t b) {
  return kendall_tau(u.column(a), u.column(b));
}

// C12 = Gaussian(0.7), C23 = Clayton(2), C13|2 = Independence.
VineModel known_vine() {
  VineModel m;
  m.structure.d = 3;
  m.structure.truncation = 2;
  m.structure.trees = {{VineEdge{0, 1, {}, 0, 1}, VineEdge{1, 2, {}, 1, 2}},
                       {VineEdge{0, 2, {1}, 0, 1}}};
  m.copulas = {{make_pair(Family::gaussian, 0.7), make_pair(Family::clayton, 2.0)},
               {make_pair(Family::independence, 0.0)}};
  m.tau_hat = {{0, 0}, {0}};
  return m;
}

Eigen::MatrixXd score_correlation(const UMatrix& u) {
  const auto n = static_cast<Eigen::Index>(u.rows());
  const auto d = static_cast<Eigen::Index>(u.cols());
  Eigen::MatrixXd z(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) z(r, c) = norm_quantile(u(r, c));
  z.rowwise() -= z.colwise().mean();
  Eigen::MatrixXd cov = z.transpose() * z;
  const Eigen::VectorXd s = cov.diagonal().cwiseSqrt().cwiseInverse();
  return s.asDiagonal() * cov * s.asDiagonal();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fit_gaussian examples") {
  const auto m = fit_gaussian(independent_uniforms(5000, 4, 1));
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) CHECK(std::abs(m.R(i, j)) < 0.05);
  CHECK((m.L * m.L.transpose() - m.R).cwiseAbs().maxCoeff() < 1e-10);

  const auto g = gaussian_from_correlation(corr2(0.8));
  const auto fit = fit_gaussian(simulate_gaussian(g, 5000, 2));
  CHECK(std::abs(fit.R(0, 1) - 0.8) < 0.03);

  const auto one = fit_gaussian(independent_uniforms(50, 1, 3));
  CHECK(one.R.rows() == 1);
  CHECK(one.R(0, 0) == 1.0);

  UMatrix constant = independent_uniforms(50, 2, 4);
  for (std::size_t r = 0; r < 50; ++r) constant(r, 1) = 0.5;
  CHECK_THROWS_AS(fit_gaussian(constant), Error);
  CHECK_THROWS_AS(fit_gaussian(independent_uniforms(9, 2, 4)), Error);
}

TEST_CASE("gaussian regularization when n < d") {
  const auto m = fit_gaussian(independent_uniforms(12, 30, 5));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.R);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  for (int i = 0; i < 30; ++i) CHECK(m.R(i, i) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((m.L * m.L.transpose() - m.R).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("simulate_gaussian") {
  const auto ind = simulate_gaussian(gaussian_from_correlation(Eigen::MatrixXd::Identity(3, 3)),
                                     2000, 7);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) CHECK(std::abs(tau_of(ind, a, b)) < 0.05);

  const auto g = gaussian_from_correlation(corr2(0.8));
  const auto u = simulate_gaussian(g, 5000, 8);
  CHECK(std::abs(tau_of(u, 0, 1) - 2 / std::numbers::pi * std::asin(0.8)) < 0.04);
  CHECK(u.data() == simulate_gaussian(g, 5000, 8).data());
  for (double x : u.data()) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }

  Eigen::MatrixXd R(4, 4);
  R << 1, 0.5, 0.2, -0.3, 0.5, 1, 0.4, 0.0, 0.2, 0.4, 1, 0.1, -0.3, 0.0, 0.1, 1;
  const auto big = simulate_gaussian(gaussian_from_correlation(R), 5000, 9);
  CHECK((score_correlation(big) - R).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("select_structure picks the maximum spanning tree") {
  // |tau|: (0,1) ~ 0.80, (1,2) ~ 0.70, (0,2) ~ 0.64
  Eigen::MatrixXd R(3, 3);
  const double r01 = std::sin(0.8 * std::numbers::pi / 2), r12 = std::sin(0.7 * std::numbers::pi / 2);
  R << 1, r01, r01 * r12, r01, 1, r12, r01 * r12, r12, 1;
  const auto u = simulate_gaussian(gaussian_from_correlation(R), 2000, 10);
  const auto s = select_structure(u, std::nullopt);
  REQUIRE(s.trees.size() == 2);
  CHECK(s.trees[0][0].a == 0);
  CHECK(s.trees[0][0].b == 1);
  CHECK(s.trees[0][1].a == 1);
  CHECK(s.trees[0][1].b == 2);
  CHECK(s.trees[1][0].a == 0);
  CHECK(s.trees[1][0].b == 2);
  CHECK(s.trees[1][0].cond == std::vector<std::uint32_t>{1});
  CHECK(s == select_structure(u, std::nullopt));

  const auto two = select_structure(independent_uniforms(100, 2, 1), std::nullopt);
  CHECK(two.trees.size() == 1);
  CHECK(two.trees[0].size() == 1);
  CHECK_THROWS_AS(select_structure(independent_uniforms(100, 1, 1), std::nullopt), Error);
}

TEST_CASE("truncation keeps the full structure") {
  Eigen::MatrixXd R = Eigen::MatrixXd::Constant(5, 5, 0.6);
  R.diagonal().setOnes();
  const auto u = simulate_gaussian(gaussian_from_correlation(R), 800, 11);
  CopulaSpec spec{CopulaKind::vine};
  spec.truncation = 1;
  const auto m = fit_vine(u, spec);
  CHECK(m.structure.truncation == 1);
  REQUIRE(m.structure.trees.size() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(m.structure.trees[t].size() == 4 - t);
    for (const auto& e : m.structure.trees[t]) CHECK(e.cond.size() == t);
  }
  for (std::size_t t = 1; t < 4; ++t)
    for (const auto& c : m.copulas[t]) CHECK(c.family == Family::independence);
  for (const auto& c : m.copulas[0]) CHECK(c.family != Family::independence);
  CHECK(m.structure.edge_count() == 10);

  CopulaSpec full{CopulaKind::vine};
  const auto f = fit_vine(u, full);
  CHECK(f.structure.truncation == 4);
  CHECK(f.structure.edge_count() == 5 * 4 / 2);
}

TEST_CASE("complete_structure reproduces the zero-weight trees") {
  Eigen::MatrixXd R = Eigen::MatrixXd::Constant(6, 6, 0.3);
  R.diagonal().setOnes();
  const auto u = simulate_gaussian(gaussian_from_correlation(R), 600, 12);
  CopulaSpec spec{CopulaKind::vine};
  spec.truncation = 2;
  const auto m = fit_vine(u, spec);
  VineStructure s = m.structure;
  s.trees.resize(2);
  complete_structure(s);
  CHECK(s == m.structure);
}

TEST_CASE("fit_vine examples") {
  const auto truth = known_vine();
  const auto u = simulate_vine(truth, 3000, 13);
  const auto m = fit_vine(u, CopulaSpec{CopulaKind::vine});
  REQUIRE(m.structure.trees[0].size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    const auto& edge = m.structure.trees[0][e];
    const double fitted = m.copulas[0][e].tau();
    const double want = edge.a == 0 && edge.b == 1   ? 2 / std::numbers::pi * std::asin(0.7)
                        : edge.a == 1 && edge.b == 2 ? 0.5
                                                     : 0.0;
    CHECK(std::abs(fitted - want) < 0.05);
  }

  const auto ind = fit_vine(independent_uniforms(2000, 5, 14), CopulaSpec{CopulaKind::vine});
  // Ten pairwise tests at the 5 % level: allow a couple of false rejections.
  std::size_t dependent = 0;
  for (const auto& tree : ind.copulas)
    for (const auto& c : tree) dependent += c.family != Family::independence;
  CHECK(dependent <= 2);

  CopulaSpec gauss_only{CopulaKind::vine, {Family::gaussian}};
  const auto g = fit_vine(u, gauss_only);
  for (const auto& tree : g.copulas)
    for (const auto& c : tree)
      CHECK((c.family == Family::gaussian || c.family == Family::independence));
}

TEST_CASE("simulate_vine examples") {
  VineModel ind = known_vine();
  for (auto& tree : ind.copulas)
    for (auto& c : tree) c = make_pair(Family::independence, 0.0);
  const auto ui = simulate_vine(ind, 2000, 15);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) CHECK(std::abs(tau_of(ui, a, b)) < 0.05);

  const auto truth = known_vine();
  const auto u = simulate_vine(truth, 5000, 16);
  CHECK(std::abs(tau_of(u, 0, 1) - 0.494) < 0.04);
  CHECK(std::abs(tau_of(u, 1, 2) - 0.5) < 0.04);
  CHECK(u.data() == simulate_vine(truth, 5000, 16).data());
  for (double x : u.data()) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
  }
}

TEST_CASE("a gaussian vine reproduces the gaussian copula it was fitted to") {
  // Exercises the sampling order and memoized h-function chains of a
  // non-trivial R-vine: every pair copula is Gaussian, so the simulated
  // normal scores must carry the source correlation matrix.
  const int d = 7;
  Eigen::MatrixXd A(d, d);
  CounterRng rng(99);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = rng.normal();
  Eigen::MatrixXd S = A * A.transpose() + Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd s = S.diagonal().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd R = s.asDiagonal() * S * s.asDiagonal();
  const auto data = simulate_gaussian(gaussian_from_correlation(R), 4000, 17);
  CopulaSpec spec{CopulaKind::vine, {Family::gaussian}};
  spec.truncation = d - 1;
  const auto m = fit_vine(data, spec);
  const auto sim = simulate_vine(m, 20000, 18);
  CHECK((score_correlation(sim) - R).cwiseAbs().maxCoeff() < 0.06);

  // A truncated plan skips h-chains beyond the truncation level.
  spec.truncation = 2;
  const auto t2 = fit_vine(data, spec);
  const auto plan_full = compile_plan(m);
  const auto plan_t2 = compile_plan(t2);
  CHECK(plan_t2.ops.size() < plan_full.ops.size());
  std::size_t uniforms = 0;
  for (const auto& op : plan_t2.ops) uniforms += op.kind == SimulationPlan::OpKind::uniform;
  CHECK(uniforms == static_cast<std::size_t>(d));
}

TEST_CASE("synthesize contract and marginals") {
  const auto train = generate_surrogate(50, LevelGrid{10}, 19);
  for (auto kind : {CopulaKind::gaussian, CopulaKind::vine}) {
    SynthesisDiagnostics diag;
    const auto out = synthesize(train, CopulaSpec{kind}, 1, 20, &diag);
    CHECK(out.size() == 50);
    CHECK_NOTHROW(validate_set(out));
    CHECK(out == synthesize(train, CopulaSpec{kind}, 1, 20));
  }

  const auto big = generate_surrogate(2000, LevelGrid{8}, 21);
  const auto synth = synthesize(big, CopulaSpec{CopulaKind::gaussian}, 1, 22);
  const auto xa = flatten(big, Which::inputs), xb = flatten(synth, Which::inputs);
  for (std::size_t c = 0; c < xa.cols(); ++c) {
    INFO("column " << xa.labels[c].str());
    CHECK(ks_statistic(xa.column(c), xb.column(c)) < 0.05);
  }
  CHECK_THROWS_AS(synthesize(ProfileSet{LevelGrid{8}, {}, {}}, CopulaSpec{}, 1, 1), Error);
}

TEST_CASE("synthesis artifacts round trip") {
  const auto train = generate_surrogate(300, LevelGrid{6}, 23);
  for (auto kind : {CopulaKind::gaussian, CopulaKind::vine}) {
    CopulaSpec spec{kind};
    if (kind == CopulaKind::vine) spec.truncation = 3;
    const auto m = fit_synthesis(train, spec);
    const auto path = test::temp_path("model_" + std::string(to_string(kind)) + ".json");
    save_synthesis(path, m);
    const auto back = load_synthesis(path);
    CHECK(sample_synthesis(back, 200, 5).data() == sample_synthesis(m, 200, 5).data());
    const auto path2 = test::temp_path("model2_" + std::string(to_string(kind)) + ".json");
    save_synthesis(path2, back);
    CHECK(slurp(path) == slurp(path2));
    CHECK(slurp(path).find("\"version\": 1") != std::string::npos);
    if (kind == CopulaKind::vine) {
      CHECK(back.vine.structure == m.vine.structure);
      CHECK(back.vine.copulas == m.vine.copulas);
    }
  }
  const auto bad = test::temp_path("bad_model.json");
  std::ofstream(bad) << "{\"format\": \"copaug-synthesis\", \"version\": 99}";
  CHECK_THROWS_AS(load_synthesis(bad), Error);
}

TEST_CASE("constant features pass through synthesis") {
  auto train = generate_surrogate(100, LevelGrid{5}, 24);
  for (auto& p : train.profiles) p.tau_c.assign(5, 0.0);
  const auto m = fit_synthesis(train, CopulaSpec{CopulaKind::gaussian});
  CHECK(m.active.size() == 10);
  const auto out = to_profiles(sample_synthesis(m, 40, 1), train.grid);
  for (const auto& p : out.profiles)
    for (double t : p.tau_c) CHECK(t == 0.0);
}

TEST_CASE("non-monotone pressure columns are re-sorted and counted") {
  const LevelGrid grid{3};
  DataMatrix x(2, 9);
  const double rows[2][9] = {{200, 250, 290, 100, 300, 500, 0, 0, 0},
                             {200, 250, 290, 300, 100, 300, 0, 0, 0}};
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 9; ++c) x(r, c) = rows[r][c];
  SynthesisDiagnostics diag;
  const auto set = to_profiles(x, grid, &diag);
  CHECK(diag.pressure_resorted == 1);
  CHECK(set.profiles[1].p[0] == 100);
  CHECK(set.profiles[1].p[1] == 300);
  CHECK(set.profiles[1].p[2] > 300);
}
