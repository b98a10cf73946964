// SPDX-License-Identifier: Apache-2.0
//
// Profile data model: vertical columns of temperature, pressure and cloud
// optical depth on a fixed level grid, plus the flat sample-by-feature matrix
// view used by the copula and emulator stages.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace copaug {

/// Full levels run 1 (top of atmosphere) .. n_full (surface); half levels
/// run 0 (TOA interface) .. n_full (surface interface).
struct LevelGrid {
  std::size_t n_full = 0;

  std::size_t n_half() const noexcept { return n_full + 1; }
  friend bool operator==(const LevelGrid&, const LevelGrid&) = default;
};

struct Profile {
  std::vector<double> T;      // [K]
  std::vector<double> p;      // [Pa], strictly increasing toward the surface
  std::vector<double> tau_c;  // [1], >= 0

  friend bool operator==(const Profile&, const Profile&) = default;
};

/// Throws Error(invariant) describing the first violated Profile invariant.
void validate_profile(const Profile& prof, const LevelGrid& grid);

struct ProfileSet {
  LevelGrid grid;
  std::vector<Profile> profiles;
  /// Downwelling longwave flux per profile on half levels [W m-2]; either
  /// empty or one entry per profile.
  std::vector<std::vector<double>> fluxes;

  std::size_t size() const noexcept { return profiles.size(); }
  bool has_fluxes() const noexcept { return !fluxes.empty(); }
  friend bool operator==(const ProfileSet&, const ProfileSet&) = default;
};

void validate_set(const ProfileSet& set);

struct ColumnLabel {
  std::string quantity;  // "T", "p", "tauc" or "L"
  std::size_t level = 0;

  std::string str() const { return quantity + "_" + std::to_string(level); }
  friend bool operator==(const ColumnLabel&, const ColumnLabel&) = default;
};

/// Row-major samples x features matrix with column labels.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  std::vector<ColumnLabel> labels;

  /// Rows of `other` appended below; column counts must agree.
  void append_rows(const DataMatrix& other);

  friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_ &&
           a.labels == b.labels;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Which { inputs, outputs };

/// Inputs: columns T_1..T_n, p_1..p_n, tauc_1..tauc_n. Outputs: L_0..L_n.
DataMatrix flatten(const ProfileSet& set, Which which);
/// Inverse of flatten(set, Which::inputs).
ProfileSet unflatten(const DataMatrix& m, const LevelGrid& grid);
/// Attaches an outputs matrix as fluxes.
void attach_fluxes(ProfileSet& set, const DataMatrix& outputs);

std::vector<ColumnLabel> input_labels(const LevelGrid& grid);
std::vector<ColumnLabel> output_labels(const LevelGrid& grid);

/// Reads the wide-format profile file. The header decides whether flux
/// columns are present. Errors name the offending 1-based data row.
ProfileSet load_profiles(const std::filesystem::path& path, const LevelGrid& grid);
/// Infers the grid from the header.
ProfileSet load_profiles(const std::filesystem::path& path);
void save_profiles(const std::filesystem::path& path, const ProfileSet& set);

/// Cloud layer optical depth from condensate mixing ratios [kg/kg], effective
/// radii [m] and layer pressure thickness [Pa].
std::vector<double> derive_cloud_optical_depth(std::span<const double> q_liquid,
                                               std::span<const double> q_ice,
                                               std::span<const double> r_liquid,
                                               std::span<const double> r_ice,
                                               std::span<const double> dp);

inline constexpr double kGravity = 9.81;
inline constexpr double kRhoLiquid = 1000.0;
inline constexpr double kRhoIce = 917.0;

struct SplitSpec {
  double train = 0.4;
  double validation = 0.2;
  double test = 0.4;
  std::uint64_t seed = 0;
};

struct SplitSizes {
  std::size_t train, validation, test;
};

/// Counts used by split_shuffle: train and validation are rounded, test
/// takes the remainder when the fractions sum to one.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

struct Split {
  ProfileSet train, validation, test;
};

Split split_shuffle(const ProfileSet& data, const SplitSpec& spec);

/// Row subset in the given order (fluxes follow when present).
ProfileSet subset(const ProfileSet& data, std::span<const std::size_t> rows);
/// Concatenation; grids must match and both or neither carry fluxes.
ProfileSet concat(const ProfileSet& a, const ProfileSet& b);

/// Desk-scale stand-in for the operational profile collection.
ProfileSet generate_surrogate(std::size_t n, const LevelGrid& grid,
                              std::uint64_t seed);

/// Sigma coordinate of full level i (0-based) used by the surrogate grid.
double surrogate_sigma(std::size_t level, std::size_t n_full);

}  // namespace copaug
