#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "copaug/emulator.hpp"
#include "copaug/error.hpp"
#include "copaug/radiation.hpp"
#include "copaug/rng.hpp"
#include "test_util.hpp"

using namespace copaug;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("init_mlp") {
  const MLPLayout layout{9, {4}, 4};
  const auto m = init_mlp(layout, 42);
  REQUIRE(m.layers.size() == 2);
  CHECK(m.layers[0].W.rows() == 9);
  CHECK(m.layers[0].W.cols() == 4);
  CHECK(m.layers[1].W.rows() == 4);
  CHECK(max_abs(m.layers[0].W) <= 1.0 / 3.0);
  CHECK(max_abs(m.layers[1].W) <= 0.5);
  for (const auto& l : m.layers) CHECK(l.b.isZero(0.0));
  const auto again = init_mlp(layout, 42);
  for (std::size_t l = 0; l < 2; ++l) CHECK(m.layers[l].W == again.layers[l].W);
  CHECK_FALSE(m.layers[0].W == init_mlp(layout, 43).layers[0].W);
  CHECK_THROWS_AS(init_mlp(MLPLayout{0, {4}, 4}, 1), Error);
  CHECK_THROWS_AS(init_mlp(MLPLayout{3, {0}, 4}, 1), Error);
}

TEST_CASE("forward examples") {
  auto m = init_mlp(MLPLayout{5, {7, 3}, 2}, 1);
  for (auto& l : m.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  CHECK(forward(m, random_matrix(4, 5, 2)).isZero(0.0));

  auto lin = init_mlp(MLPLayout{1, {}, 1}, 1);
  lin.layers[0].W(0, 0) = 2.0;
  lin.layers[0].b(0) = 1.0;
  Matrix x(1, 1);
  x << 3.0;
  CHECK(forward(lin, x)(0, 0) == 7.0);

  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(elu(-1.0) == doctest::Approx(-0.6321).epsilon(1e-4));
  CHECK(elu(2.5) == 2.5);
  CHECK_THROWS_AS(forward(lin, Matrix(1, 2)), Error);
}

TEST_CASE("huber_loss examples") {
  Matrix a(1, 2), b(1, 2);
  a << 1.0, 2.0;
  CHECK(huber_loss(a, a, 1.0) == 0.0);
  Matrix p(1, 1), t(1, 1);
  p << 0.5;
  t << 0.0;
  CHECK(huber_loss(p, t, 1.0) == 0.125);
  p << 3.0;
  CHECK(huber_loss(p, t, 1.0) == 2.5);
  b << 1.0, 5.0;
  CHECK(huber_loss(a, b, 1.0) == doctest::Approx(0.5 * 2.5));
  CHECK_THROWS_AS(huber_loss(a, t, 1.0), Error);
}

TEST_CASE("analytic gradients match central differences") {
  auto m = init_mlp(MLPLayout{9, {8, 8}, 4}, 3);
  for (auto& l : m.layers)
    for (Eigen::Index k = 0; k < l.b.size(); ++k) l.b(k) = 0.1 * std::sin(double(k));
  const Matrix x = random_matrix(16, 9, 4);
  // Targets spread so both Huber branches are active.
  const Matrix y = random_matrix(16, 4, 5, 2.0);
  m.norm = Normalizer::fit(x);
  std::vector<Dense> grad;
  loss_and_gradient(m, x, y, 1.0, &grad);

  const double h = 1e-5;
  double worst = 0.0;
  auto probe = [&](double& w, double analytic) {
    const double keep = w;
    w = keep + h;
    const double up = loss_and_gradient(m, x, y, 1.0, nullptr);
    w = keep - h;
    const double down = loss_and_gradient(m, x, y, 1.0, nullptr);
    w = keep;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic));
    worst = std::max(worst, rel);
  };
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (Eigen::Index k = 0; k < m.layers[l].W.size(); ++k)
      probe(m.layers[l].W.data()[k], grad[l].W.data()[k]);
    for (Eigen::Index k = 0; k < m.layers[l].b.size(); ++k)
      probe(m.layers[l].b.data()[k], grad[l].b.data()[k]);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adam with zero gradient leaves weights unchanged") {
  auto m = init_mlp(MLPLayout{3, {4}, 2}, 6);
  const auto before = m.layers;
  Adam opt(m.layers);
  std::vector<Dense> zero = m.layers;
  for (auto& d : zero) {
    d.W.setZero();
    d.b.setZero();
  }
  opt.update(m.layers, zero, TrainConfig{});
  for (std::size_t l = 0; l < before.size(); ++l) {
    CHECK(m.layers[l].W == before[l].W);
    CHECK(m.layers[l].b == before[l].b);
  }
}

TEST_CASE("training overfits a tiny set and predicts it back") {
  const Matrix x = random_matrix(10, 5, 7);
  Matrix y(10, 3);
  for (Eigen::Index r = 0; r < 10; ++r)
    for (Eigen::Index c = 0; c < 3; ++c) y(r, c) = std::sin(x(r, c) + c) + 0.5 * x(r, 4);
  TrainConfig cfg;
  cfg.epochs = 2000;
  cfg.patience = 2000;
  cfg.batch_size = 10;
  cfg.seed = 1;
  const auto m = train(init_mlp(MLPLayout{5, {64, 64}, 3}, 2), x, y, x, y, cfg);
  const double mae = (forward(m, x) - y).cwiseAbs().mean();
  CHECK(mae < 1e-2);
  CHECK(m.history.size() <= 2000);
}

TEST_CASE("early stopping returns the best validation weights") {
  const Matrix x = random_matrix(64, 4, 8);
  const Matrix y = random_matrix(64, 2, 9);  // pure noise: validation loss plateaus early
  const Matrix vx = random_matrix(32, 4, 10);
  const Matrix vy = random_matrix(32, 2, 11);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.patience = 5;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-2;
  cfg.seed = 3;
  const auto m = train(init_mlp(MLPLayout{4, {32}, 2}, 4), x, y, vx, vy, cfg);
  REQUIRE(m.best_epoch >= 1);
  CHECK(m.history.size() < 400);
  CHECK(m.history.size() == m.best_epoch + cfg.patience);
  double best = HUGE_VAL;
  for (const auto& h : m.history) best = std::min(best, h.val_loss);
  CHECK(m.history[m.best_epoch - 1].val_loss == best);
  CHECK(huber_loss(forward(m, vx), vy, cfg.huber_delta) == best);
  for (const auto& h : m.history) CHECK(std::isfinite(h.train_loss));

  const auto again = train(init_mlp(MLPLayout{4, {32}, 2}, 4), x, y, vx, vy, cfg);
  REQUIRE(again.history.size() == m.history.size());
  for (std::size_t e = 0; e < m.history.size(); ++e) {
    CHECK(again.history[e].train_loss == m.history[e].train_loss);
    CHECK(again.history[e].val_loss == m.history[e].val_loss);
  }
}

TEST_CASE("training rejects bad configuration and non-finite loss") {
  const Matrix x = random_matrix(8, 2, 1), y = random_matrix(8, 1, 2);
  TrainConfig cfg;
  cfg.patience = cfg.epochs + 1;
  CHECK_THROWS_AS(train(init_mlp(MLPLayout{2, {3}, 1}, 1), x, y, x, y, cfg), Error);
  Matrix bad = y;
  bad(3, 0) = std::nan("");
  try {
    train(init_mlp(MLPLayout{2, {3}, 1}, 1), x, bad, x, y, TrainConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::convergence);
    CHECK(std::string(e.what()).find("epoch 1, batch 1") != std::string::npos);
  }
}

TEST_CASE("normalizer floors constant features") {
  Matrix x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  const auto n = Normalizer::fit(x);
  CHECK(n.std(1) == Normalizer::kStdFloor);
  CHECK(n.mean(1) == 5.0);
  CHECK(n.apply(x).col(1).isZero(0.0));
}

TEST_CASE("predict_set and artifacts") {
  const auto set = radiate_set(generate_surrogate(30, LevelGrid{6}, 12));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.patience = 3;
  const auto xm = to_matrix(flatten(set, Which::inputs));
  const auto ym = to_matrix(flatten(set, Which::outputs));
  const auto m = train(init_mlp(MLPLayout{18, {16}, 7}, 5), xm, ym, xm, ym, cfg);
  const auto pred = predict_set(m, set);
  CHECK(pred.cols() == 7);
  CHECK(pred.rows() == 30);

  ProfileSet rev = set;
  std::reverse(rev.profiles.begin(), rev.profiles.end());
  const auto pr = predict_set(m, rev);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 7; ++c) CHECK(pr(r, c) == doctest::Approx(pred(29 - r, c)).epsilon(1e-12));

  const auto path = test::temp_path("mlp.json");
  save_mlp(path, m);
  const auto back = load_mlp(path);
  CHECK(predict_set(back, set).data() == pred.data());
  CHECK(back.history.size() == m.history.size());
  CHECK(back.best_epoch == m.best_epoch);
  CHECK_THROWS_AS(predict_set(m, generate_surrogate(3, LevelGrid{5}, 1)), Error);

  const auto big = init_mlp(MLPLayout{411, {8}, 138}, 1);
  CHECK(forward(big, Matrix::Zero(2, 411)).cols() == 138);
}
