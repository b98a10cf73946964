// SPDX-License-Identifier: Apache-2.0
#include "copaug/emulator.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "copaug/error.hpp"
#include "copaug/rng.hpp"
#include "json.hpp"

namespace copaug {

void validate(const MLPLayout& layout) {
  require(layout.input >= 1 && layout.output >= 1, ErrorCategory::domain,
          "network input and output widths must be >= 1");
  for (auto w : layout.hidden)
    require(w >= 1, ErrorCategory::domain, "hidden layer widths must be >= 1");
}

void validate(const TrainConfig& cfg) {
  require(cfg.epochs >= 1 && cfg.patience >= 1 && cfg.batch_size >= 1, ErrorCategory::config,
          "epochs, patience and batch size must be positive");
  require(cfg.patience <= cfg.epochs, ErrorCategory::config, "patience exceeds the epoch limit");
  require(cfg.learning_rate > 0 && cfg.epsilon > 0 && cfg.huber_delta > 0, ErrorCategory::config,
          "learning rate, epsilon and huber delta must be positive");
  require(cfg.beta1 > 0 && cfg.beta1 < 1 && cfg.beta2 > 0 && cfg.beta2 < 1, ErrorCategory::config,
          "adam betas must lie in (0, 1)");
}

Normalizer Normalizer::identity(std::size_t width) {
  const auto w = static_cast<Eigen::Index>(width);
  return {Eigen::RowVectorXd::Zero(w), Eigen::RowVectorXd::Ones(w)};
}

Normalizer Normalizer::fit(const Matrix& x) {
  require(x.rows() >= 1, ErrorCategory::domain, "normalizer needs at least one row");
  Normalizer n;
  n.mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - n.mean;
  n.std = (centered.array().square().colwise().sum() / static_cast<double>(x.rows()))
              .sqrt()
              .max(kStdFloor)
              .matrix();
  return n;
}

Matrix Normalizer::apply(const Matrix& x) const {
  require(x.cols() == mean.size(), ErrorCategory::domain, "input width mismatch");
  return ((x.rowwise() - mean).array().rowwise() / std.array()).matrix();
}

MLPModel init_mlp(const MLPLayout& layout, std::uint64_t seed) {
  validate(layout);
  MLPModel m;
  m.layout = layout;
  m.norm = Normalizer::identity(layout.input);
  std::vector<std::size_t> widths{layout.input};
  widths.insert(widths.end(), layout.hidden.begin(), layout.hidden.end());
  widths.push_back(layout.output);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(widths[l]);
    const auto out = static_cast<Eigen::Index>(widths[l + 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    CounterRng rng(seed, l);
    Dense d{Matrix(in, out), Eigen::RowVectorXd::Zero(out)};
    for (Eigen::Index i = 0; i < in; ++i)
      for (Eigen::Index j = 0; j < out; ++j) d.W(i, j) = scale * (2.0 * rng.uniform() - 1.0);
    m.layers.push_back(std::move(d));
  }
  return m;
}

namespace {

void elu_inplace(Matrix& z) {
  z = (z.array() >= 0.0).select(z.array(), z.array().expm1());
}

// Forward pass on normalized input keeping every layer's pre-activation.
void forward_keep(const std::vector<Dense>& layers, const Matrix& xn, std::vector<Matrix>& acts,
                  std::vector<Matrix>& pre) {
  const std::size_t nl = layers.size();
  acts.resize(nl + 1);
  pre.resize(nl);
  acts[0] = xn;
  for (std::size_t l = 0; l < nl; ++l) {
    pre[l].noalias() = acts[l] * layers[l].W;
    pre[l].rowwise() += layers[l].b;
    acts[l + 1] = pre[l];
    if (l + 1 < nl) elu_inplace(acts[l + 1]);
  }
}

Matrix forward_normalized(const std::vector<Dense>& layers, const Matrix& xn) {
  Matrix a = xn;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = a * layers[l].W;
    z.rowwise() += layers[l].b;
    if (l + 1 < layers.size()) elu_inplace(z);
    a = std::move(z);
  }
  return a;
}

double huber_sum(const Matrix& pred, const Matrix& target, double delta) {
  double s = 0.0;
  const double* p = pred.data();
  const double* t = target.data();
  for (Eigen::Index k = 0; k < pred.size(); ++k) {
    const double a = std::abs(p[k] - t[k]);
    s += a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
  }
  return s;
}

double backprop(const std::vector<Dense>& layers, const Matrix& xn, const Matrix& y, double delta,
                std::vector<Dense>* grad, std::vector<Matrix>& acts, std::vector<Matrix>& pre) {
  forward_keep(layers, xn, acts, pre);
  const Matrix& out = acts.back();
  require(out.rows() == y.rows() && out.cols() == y.cols(), ErrorCategory::domain,
          "target shape does not match network output");
  const double count = static_cast<double>(out.size());
  const double loss = huber_sum(out, y, delta) / count;
  if (!grad) return loss;

  const std::size_t nl = layers.size();
  grad->resize(nl);
  Matrix g = ((out - y).array().max(-delta).min(delta) / count).matrix();
  for (std::size_t l = nl; l-- > 0;) {
    (*grad)[l].W.noalias() = acts[l].transpose() * g;
    (*grad)[l].b = g.colwise().sum();
    if (l == 0) break;
    Matrix back = g * layers[l].W.transpose();
    // ELU'(z) = 1 for z > 0, otherwise exp(z) = ELU(z) + 1.
    const auto z = pre[l - 1].array();
    g = back.array() * (z > 0.0).select(1.0, acts[l].array() + 1.0);
  }
  return loss;
}

void check_widths(const MLPModel& m, const Matrix& x, const Matrix* y) {
  require(static_cast<std::size_t>(x.cols()) == m.layout.input, ErrorCategory::domain,
          "input width " + std::to_string(x.cols()) + " does not match network input " +
              std::to_string(m.layout.input));
  if (y)
    require(static_cast<std::size_t>(y->cols()) == m.layout.output && y->rows() == x.rows(),
            ErrorCategory::domain, "target shape does not match network output");
}

}  // namespace

Matrix forward(const MLPModel& m, const Matrix& x) {
  check_widths(m, x, nullptr);
  return forward_normalized(m.layers, m.norm.apply(x));
}

double huber_loss(const Matrix& pred, const Matrix& target, double delta) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorCategory::domain,
          "huber loss: shape mismatch");
  require(delta > 0, ErrorCategory::domain, "huber delta must be positive");
  if (pred.size() == 0) return 0.0;
  return huber_sum(pred, target, delta) / static_cast<double>(pred.size());
}

double loss_and_gradient(const MLPModel& m, const Matrix& x, const Matrix& y, double delta,
                         std::vector<Dense>* grad) {
  check_widths(m, x, &y);
  std::vector<Matrix> acts, pre;
  return backprop(m.layers, m.norm.apply(x), y, delta, grad, acts, pre);
}

Adam::Adam(const std::vector<Dense>& shape_like) {
  for (const auto& d : shape_like) {
    m1.push_back({Matrix::Zero(d.W.rows(), d.W.cols()), Eigen::RowVectorXd::Zero(d.b.size())});
    m2.push_back(m1.back());
  }
}

void Adam::update(std::vector<Dense>& layers, const std::vector<Dense>& grad,
                  const TrainConfig& cfg) {
  ++step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double lr = cfg.learning_rate, b1 = cfg.beta1, b2 = cfg.beta2, eps = cfg.epsilon;
  auto apply = [&](auto& w, const auto& g, auto& a, auto& v) {
    a = b1 * a + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    w.array() -= lr * (a.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    apply(layers[l].W, grad[l].W, m1[l].W, m2[l].W);
    apply(layers[l].b, grad[l].b, m1[l].b, m2[l].b);
  }
}

MLPModel train(MLPModel m, const Matrix& train_x, const Matrix& train_y, const Matrix& val_x,
               const Matrix& val_y, const TrainConfig& cfg) {
  validate(cfg);
  require(train_x.rows() >= 1 && val_x.rows() >= 1, ErrorCategory::domain,
          "training and validation sets must be nonempty");
  check_widths(m, train_x, &train_y);
  check_widths(m, val_x, &val_y);

  m.norm = Normalizer::fit(train_x);
  m.history.clear();
  m.best_epoch = 0;
  const Matrix xn = m.norm.apply(train_x);
  const Matrix vn = m.norm.apply(val_x);
  const auto n = static_cast<std::size_t>(xn.rows());

  Adam opt(m.layers);
  std::vector<Dense> grad;
  std::vector<Matrix> acts, pre;
  std::vector<Dense> best = m.layers;
  double best_val = HUGE_VAL;
  std::vector<Eigen::Index> order(n);
  Matrix bx, by;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    CounterRng rng(cfg.seed, epoch);
    shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0, batch = 1; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      bx.resize(static_cast<Eigen::Index>(len), xn.cols());
      by.resize(static_cast<Eigen::Index>(len), train_y.cols());
      for (std::size_t k = 0; k < len; ++k) {
        bx.row(static_cast<Eigen::Index>(k)) = xn.row(order[start + k]);
        by.row(static_cast<Eigen::Index>(k)) = train_y.row(order[start + k]);
      }
      const double loss = backprop(m.layers, bx, by, cfg.huber_delta, &grad, acts, pre);
      if (!std::isfinite(loss))
        fail(ErrorCategory::convergence, "non-finite training loss at epoch " +
                                             std::to_string(epoch) + ", batch " +
                                             std::to_string(batch));
      opt.update(m.layers, grad, cfg);
      total += loss * static_cast<double>(len);
    }
    const double val = huber_loss(forward_normalized(m.layers, vn), val_y, cfg.huber_delta);
    if (!std::isfinite(val))
      fail(ErrorCategory::convergence,
           "non-finite validation loss at epoch " + std::to_string(epoch));
    m.history.push_back({total / static_cast<double>(n), val});
    if (val < best_val) {
      best_val = val;
      best = m.layers;
      m.best_epoch = epoch;
    } else if (epoch - m.best_epoch >= cfg.patience) {
      break;
    }
  }
  m.layers = std::move(best);
  return m;
}

Matrix to_matrix(const DataMatrix& d) {
  Matrix m(static_cast<Eigen::Index>(d.rows()), static_cast<Eigen::Index>(d.cols()));
  std::copy(d.data().begin(), d.data().end(), m.data());
  return m;
}

DataMatrix from_matrix(const Matrix& m, std::vector<ColumnLabel> labels) {
  DataMatrix d(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  std::copy(m.data(), m.data() + m.size(), d.data().begin());
  d.labels = std::move(labels);
  return d;
}

DataMatrix predict_set(const MLPModel& m, const ProfileSet& profiles) {
  require(3 * profiles.grid.n_full == m.layout.input &&
              profiles.grid.n_half() == m.layout.output,
          ErrorCategory::domain, "profile grid does not match the network layout");
  return from_matrix(forward(m, to_matrix(flatten(profiles, Which::inputs))),
                     output_labels(profiles.grid));
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  const auto v = j.at("data").get<std::vector<double>>();
  require(static_cast<Eigen::Index>(v.size()) == r * c, ErrorCategory::schema,
          "matrix data length does not match its shape");
  Matrix m(r, c);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

std::vector<double> vec(const Eigen::RowVectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::RowVectorXd row_from(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_mlp(const std::filesystem::path& path, const MLPModel& m) {
  using nlohmann::json;
  json j;
  j["format"] = "copaug-mlp";
  j["version"] = kMlpArtifactVersion;
  j["layout"] = {{"input", m.layout.input}, {"hidden", m.layout.hidden}, {"output", m.layout.output},
                 {"activation", "elu"}};
  j["normalizer"] = {{"mean", vec(m.norm.mean)}, {"std", vec(m.norm.std)}};
  json layers = json::array();
  for (const auto& d : m.layers) layers.push_back({{"W", matrix_json(d.W)}, {"b", vec(d.b)}});
  j["layers"] = layers;
  json hist = json::array();
  for (const auto& h : m.history) hist.push_back({h.train_loss, h.val_loss});
  j["history"] = hist;
  j["best_epoch"] = m.best_epoch;
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot write " + path.string());
  out << j.dump() << '\n';
  require(out.good(), ErrorCategory::io, "failed writing " + path.string());
}

MLPModel load_mlp(const std::filesystem::path& path) {
  using nlohmann::json;
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open " + path.string());
  try {
    json j;
    in >> j;
    require(j.at("format") == "copaug-mlp", ErrorCategory::schema, "not a network artifact");
    require(j.at("version").get<int>() == kMlpArtifactVersion, ErrorCategory::schema,
            "unsupported network artifact version");
    MLPModel m;
    const auto& lay = j.at("layout");
    m.layout.input = lay.at("input").get<std::size_t>();
    m.layout.hidden = lay.at("hidden").get<std::vector<std::size_t>>();
    m.layout.output = lay.at("output").get<std::size_t>();
    validate(m.layout);
    m.norm.mean = row_from(j.at("normalizer").at("mean").get<std::vector<double>>());
    m.norm.std = row_from(j.at("normalizer").at("std").get<std::vector<double>>());
    require(static_cast<std::size_t>(m.norm.mean.size()) == m.layout.input &&
                static_cast<std::size_t>(m.norm.std.size()) == m.layout.input,
            ErrorCategory::schema, "normalizer width mismatch");
    std::size_t prev = m.layout.input;
    std::vector<std::size_t> outs = m.layout.hidden;
    outs.push_back(m.layout.output);
    require(j.at("layers").size() == outs.size(), ErrorCategory::schema, "layer count mismatch");
    for (std::size_t l = 0; l < outs.size(); ++l) {
      const auto& lj = j.at("layers")[l];
      Dense d{matrix_from_json(lj.at("W")), row_from(lj.at("b").get<std::vector<double>>())};
      require(static_cast<std::size_t>(d.W.rows()) == prev &&
                  static_cast<std::size_t>(d.W.cols()) == outs[l] &&
                  static_cast<std::size_t>(d.b.size()) == outs[l],
              ErrorCategory::schema, "layer " + std::to_string(l) + " has the wrong shape");
      prev = outs[l];
      m.layers.push_back(std::move(d));
    }
    for (const auto& h : j.at("history"))
      m.history.push_back({h.at(0).get<double>(), h.at(1).get<double>()});
    m.best_epoch = j.at("best_epoch").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCategory::schema, path.string() + ": " + e.what());
  }
}

}  // namespace copaug
