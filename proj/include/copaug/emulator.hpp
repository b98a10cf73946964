// SPDX-License-Identifier: Apache-2.0
//
// Fully connected regression network: z-scored inputs, ELU hidden layers,
// linear output, trained with mini-batch Adam on the mean Huber loss and
// early stopping on a validation set.
#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "copaug/dataset.hpp"

namespace copaug {

/// Samples are rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MLPLayout {
  std::size_t input = 0;
  std::vector<std::size_t> hidden{512, 512, 512};
  std::size_t output = 0;

  friend bool operator==(const MLPLayout&, const MLPLayout&) = default;
};

void validate(const MLPLayout& layout);

struct Normalizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;

  static constexpr double kStdFloor = 1e-8;
  static Normalizer identity(std::size_t width);
  static Normalizer fit(const Matrix& x);
  Matrix apply(const Matrix& x) const;
};

/// y = x W + b for a batch x (rows are samples); W is fan_in x fan_out.
struct Dense {
  Matrix W;
  Eigen::RowVectorXd b;
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct MLPModel {
  MLPLayout layout;
  std::vector<Dense> layers;
  Normalizer norm;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based; 0 when untrained
};

struct TrainConfig {
  std::size_t epochs = 1000;
  std::size_t patience = 25;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

inline double elu(double v) noexcept { return v >= 0.0 ? v : std::expm1(v); }

MLPModel init_mlp(const MLPLayout& layout, std::uint64_t seed);

/// Normalizes x with the model's normalizer, then runs the network.
Matrix forward(const MLPModel& m, const Matrix& x);

double huber_loss(const Matrix& pred, const Matrix& target, double delta);

/// Mean Huber loss of the network on (x, y) and, if `grad` is given, its
/// gradient with respect to every layer's W and b (same shapes as m.layers).
double loss_and_gradient(const MLPModel& m, const Matrix& x, const Matrix& y, double delta,
                         std::vector<Dense>* grad);

struct Adam {
  std::vector<Dense> m1, m2;
  std::size_t step = 0;

  explicit Adam(const std::vector<Dense>& shape_like);
  void update(std::vector<Dense>& layers, const std::vector<Dense>& grad, const TrainConfig& cfg);
};

/// Fits the normalizer on train_x, then trains from m's current weights.
MLPModel train(MLPModel m, const Matrix& train_x, const Matrix& train_y, const Matrix& val_x,
               const Matrix& val_y, const TrainConfig& cfg);

Matrix to_matrix(const DataMatrix& d);
DataMatrix from_matrix(const Matrix& m, std::vector<ColumnLabel> labels = {});

/// Predicted downwelling flux on half levels, one row per profile.
DataMatrix predict_set(const MLPModel& m, const ProfileSet& profiles);

inline constexpr int kMlpArtifactVersion = 1;

void save_mlp(const std::filesystem::path& path, const MLPModel& m);
MLPModel load_mlp(const std::filesystem::path& path);

}  // namespace copaug
