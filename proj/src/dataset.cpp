// SPDX-License-Identifier: Apache-2.0
#include "copaug/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "copaug/error.hpp"
#include "copaug/rng.hpp"
#include "text_io.hpp"

namespace copaug {

namespace {

using detail::append_double;
using detail::parse_double;
using detail::split_commas;

std::string row_ctx(std::size_t row) { return "row " + std::to_string(row) + ": "; }

}  // namespace

void validate_profile(const Profile& prof, const LevelGrid& grid) {
  const auto n = grid.n_full;
  require(n >= 1, ErrorCategory::invariant, "level grid needs n_full >= 1");
  require(prof.T.size() == n && prof.p.size() == n && prof.tau_c.size() == n,
          ErrorCategory::invariant, "profile arrays must have length n_full");
  for (std::size_t i = 0; i < n; ++i) {
    require(std::isfinite(prof.T[i]) && prof.T[i] > 0.0, ErrorCategory::invariant,
            "temperature must be positive at level " + std::to_string(i + 1));
    require(std::isfinite(prof.p[i]), ErrorCategory::invariant,
            "pressure not finite at level " + std::to_string(i + 1));
    require(std::isfinite(prof.tau_c[i]) && prof.tau_c[i] >= 0.0,
            ErrorCategory::invariant,
            "cloud optical depth must be >= 0 at level " + std::to_string(i + 1));
    if (i > 0)
      require(prof.p[i] > prof.p[i - 1], ErrorCategory::invariant,
              "pressure must increase toward the surface at level " +
                  std::to_string(i + 1));
  }
}

void validate_set(const ProfileSet& set) {
  for (std::size_t r = 0; r < set.profiles.size(); ++r) {
    try {
      validate_profile(set.profiles[r], set.grid);
    } catch (const Error& e) {
      fail(e.category(), row_ctx(r + 1) + e.what());
    }
  }
  if (set.has_fluxes()) {
    require(set.fluxes.size() == set.profiles.size(), ErrorCategory::invariant,
            "flux count does not match profile count");
    for (std::size_t r = 0; r < set.fluxes.size(); ++r)
      require(set.fluxes[r].size() == set.grid.n_half(), ErrorCategory::invariant,
              row_ctx(r + 1) + "flux profile must have n_half entries");
  }
}

std::vector<double> DataMatrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = data_[r * cols_ + c];
  return out;
}

void DataMatrix::set_column(std::size_t c, std::span<const double> values) {
  for (std::size_t r = 0; r < rows_; ++r) data_[r * cols_ + c] = values[r];
}

void DataMatrix::append_rows(const DataMatrix& other) {
  if (rows_ == 0 && cols_ == 0) {
    *this = other;
    return;
  }
  require(other.cols_ == cols_, ErrorCategory::schema,
          "cannot append rows with a different column count");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  rows_ += other.rows_;
}

std::vector<ColumnLabel> input_labels(const LevelGrid& grid) {
  std::vector<ColumnLabel> labels;
  labels.reserve(3 * grid.n_full);
  for (const char* q : {"T", "p", "tauc"})
    for (std::size_t i = 1; i <= grid.n_full; ++i) labels.push_back({q, i});
  return labels;
}

std::vector<ColumnLabel> output_labels(const LevelGrid& grid) {
  std::vector<ColumnLabel> labels;
  for (std::size_t i = 0; i < grid.n_half(); ++i) labels.push_back({"L", i});
  return labels;
}

DataMatrix flatten(const ProfileSet& set, Which which) {
  const auto n = set.grid.n_full;
  if (which == Which::inputs) {
    DataMatrix m(set.size(), 3 * n);
    m.labels = input_labels(set.grid);
    for (std::size_t r = 0; r < set.size(); ++r) {
      const auto& prof = set.profiles[r];
      require(prof.T.size() == n && prof.p.size() == n && prof.tau_c.size() == n,
              ErrorCategory::schema, row_ctx(r + 1) + "profile does not match grid");
      auto row = m.row(r);
      std::copy(prof.T.begin(), prof.T.end(), row.begin());
      std::copy(prof.p.begin(), prof.p.end(), row.begin() + n);
      std::copy(prof.tau_c.begin(), prof.tau_c.end(), row.begin() + 2 * n);
    }
    return m;
  }
  require(set.has_fluxes(), ErrorCategory::schema, "profile set carries no fluxes");
  DataMatrix m(set.size(), set.grid.n_half());
  m.labels = output_labels(set.grid);
  for (std::size_t r = 0; r < set.size(); ++r) {
    require(set.fluxes[r].size() == set.grid.n_half(), ErrorCategory::schema,
            row_ctx(r + 1) + "flux profile does not match grid");
    std::copy(set.fluxes[r].begin(), set.fluxes[r].end(), m.row(r).begin());
  }
  return m;
}

ProfileSet unflatten(const DataMatrix& m, const LevelGrid& grid) {
  const auto n = grid.n_full;
  require(m.cols() == 3 * n, ErrorCategory::schema,
          "input matrix has " + std::to_string(m.cols()) + " columns, expected " +
              std::to_string(3 * n));
  ProfileSet set;
  set.grid = grid;
  set.profiles.resize(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    auto& prof = set.profiles[r];
    prof.T.assign(row.begin(), row.begin() + n);
    prof.p.assign(row.begin() + n, row.begin() + 2 * n);
    prof.tau_c.assign(row.begin() + 2 * n, row.end());
  }
  return set;
}

void attach_fluxes(ProfileSet& set, const DataMatrix& outputs) {
  require(outputs.rows() == set.size() && outputs.cols() == set.grid.n_half(),
          ErrorCategory::schema, "output matrix shape does not match profile set");
  set.fluxes.resize(set.size());
  for (std::size_t r = 0; r < set.size(); ++r) {
    auto row = outputs.row(r);
    set.fluxes[r].assign(row.begin(), row.end());
  }
}

namespace {

struct Header {
  LevelGrid grid;
  bool fluxes = false;
};

Header parse_header(std::string_view line) {
  auto cells = split_commas(line);
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.remove_suffix(1);
    while (!c.empty() && c.front() == ' ') c.remove_prefix(1);
  }
  // Strip a UTF-8 byte order mark.
  if (!cells.empty() && cells[0].starts_with("\xEF\xBB\xBF")) cells[0].remove_prefix(3);

  std::size_t n = 0;
  while (n < cells.size() && cells[n] == "T_" + std::to_string(n + 1)) ++n;
  require(n >= 1, ErrorCategory::schema, "header must start with T_1");
  Header h;
  h.grid.n_full = n;
  if (cells.size() == 3 * n)
    h.fluxes = false;
  else if (cells.size() == 4 * n + 1)
    h.fluxes = true;
  else
    fail(ErrorCategory::schema, "header has " + std::to_string(cells.size()) +
                                    " columns, expected " + std::to_string(3 * n) +
                                    " or " + std::to_string(4 * n + 1));
  std::size_t k = 0;
  for (const auto& label : input_labels(h.grid)) {
    require(cells[k] == label.str(), ErrorCategory::schema,
            "header column " + std::to_string(k + 1) + " should be " + label.str());
    ++k;
  }
  if (h.fluxes)
    for (const auto& label : output_labels(h.grid)) {
      require(cells[k] == label.str(), ErrorCategory::schema,
              "header column " + std::to_string(k + 1) + " should be " +
                  label.str());
      ++k;
    }
  return h;
}

ProfileSet load_impl(const std::filesystem::path& path, const LevelGrid* expected) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCategory::schema,
          "empty profile file " + path.string());
  const Header h = parse_header(line);
  if (expected)
    require(h.grid == *expected, ErrorCategory::schema,
            "file has " + std::to_string(h.grid.n_full) +
                " levels, expected " + std::to_string(expected->n_full));
  const auto n = h.grid.n_full;
  const std::size_t ncols = h.fluxes ? 4 * n + 1 : 3 * n;

  ProfileSet set;
  set.grid = h.grid;
  std::size_t row = 0;
  std::vector<double> values(ncols);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto cells = split_commas(line);
    require(cells.size() == ncols, ErrorCategory::schema,
            row_ctx(row) + "has " + std::to_string(cells.size()) +
                " columns, expected " + std::to_string(ncols));
    for (std::size_t c = 0; c < ncols; ++c) {
      auto v = parse_double(cells[c]);
      require(v.has_value(), ErrorCategory::schema,
              row_ctx(row) + "column " + std::to_string(c + 1) + " is not a number");
      values[c] = *v;
    }
    Profile prof;
    prof.T.assign(values.begin(), values.begin() + n);
    prof.p.assign(values.begin() + n, values.begin() + 2 * n);
    prof.tau_c.assign(values.begin() + 2 * n, values.begin() + 3 * n);
    try {
      validate_profile(prof, set.grid);
    } catch (const Error& e) {
      fail(e.category(), row_ctx(row) + e.what());
    }
    set.profiles.push_back(std::move(prof));
    if (h.fluxes) {
      std::vector<double> flux(values.begin() + 3 * n, values.end());
      for (double f : flux)
        require(f >= 0.0, ErrorCategory::invariant, row_ctx(row) + "negative flux");
      set.fluxes.push_back(std::move(flux));
    }
  }
  return set;
}

}  // namespace

ProfileSet load_profiles(const std::filesystem::path& path, const LevelGrid& grid) {
  return load_impl(path, &grid);
}

ProfileSet load_profiles(const std::filesystem::path& path) {
  return load_impl(path, nullptr);
}

void save_profiles(const std::filesystem::path& path, const ProfileSet& set) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot write " + path.string());
  std::string buf;
  auto labels = input_labels(set.grid);
  if (set.has_fluxes()) {
    auto out_labels = output_labels(set.grid);
    labels.insert(labels.end(), out_labels.begin(), out_labels.end());
  }
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (k) buf += ',';
    buf += labels[k].str();
  }
  buf += '\n';
  for (std::size_t r = 0; r < set.size(); ++r) {
    const auto& prof = set.profiles[r];
    bool first = true;
    auto put = [&](const std::vector<double>& xs) {
      for (double x : xs) {
        if (!first) buf += ',';
        first = false;
        append_double(buf, x);
      }
    };
    put(prof.T);
    put(prof.p);
    put(prof.tau_c);
    if (set.has_fluxes()) put(set.fluxes[r]);
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  require(out.good(), ErrorCategory::io, "failed writing " + path.string());
}

std::vector<double> derive_cloud_optical_depth(std::span<const double> q_liquid,
                                               std::span<const double> q_ice,
                                               std::span<const double> r_liquid,
                                               std::span<const double> r_ice,
                                               std::span<const double> dp) {
  const auto n = dp.size();
  require(q_liquid.size() == n && q_ice.size() == n && r_liquid.size() == n &&
              r_ice.size() == n,
          ErrorCategory::domain, "condensate arrays must have equal length");
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(q_liquid[i] >= 0.0 && q_ice[i] >= 0.0, ErrorCategory::domain,
            "negative mixing ratio at level " + std::to_string(i + 1));
    require(dp[i] > 0.0, ErrorCategory::domain,
            "layer pressure thickness must be positive at level " +
                std::to_string(i + 1));
    double liquid = 0.0;
    double ice = 0.0;
    if (q_liquid[i] > 0.0) {
      require(r_liquid[i] > 0.0, ErrorCategory::domain,
              "liquid effective radius must be positive at level " +
                  std::to_string(i + 1));
      liquid = q_liquid[i] / (kRhoLiquid * r_liquid[i]);
    }
    if (q_ice[i] > 0.0) {
      require(r_ice[i] > 0.0, ErrorCategory::domain,
              "ice effective radius must be positive at level " +
                  std::to_string(i + 1));
      ice = q_ice[i] / (kRhoIce * r_ice[i]);
    }
    tau[i] = 1.5 * (dp[i] / kGravity) * (liquid + ice);
  }
  return tau;
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  require(n > 0, ErrorCategory::domain, "cannot split an empty profile set");
  require(spec.train > 0.0 && spec.validation > 0.0 && spec.test > 0.0,
          ErrorCategory::config, "split fractions must be positive");
  const double sum = spec.train + spec.validation + spec.test;
  require(sum <= 1.0 + 1e-9, ErrorCategory::config,
          "split fractions sum to more than one");
  const auto nd = static_cast<double>(n);
  SplitSizes s{};
  s.train = static_cast<std::size_t>(std::llround(spec.train * nd));
  s.validation = static_cast<std::size_t>(std::llround(spec.validation * nd));
  s.train = std::min(s.train, n);
  s.validation = std::min(s.validation, n - s.train);
  const std::size_t rest = n - s.train - s.validation;
  if (std::abs(sum - 1.0) <= 1e-9)
    s.test = rest;
  else
    s.test = std::min(rest, static_cast<std::size_t>(std::llround(spec.test * nd)));
  return s;
}

ProfileSet subset(const ProfileSet& data, std::span<const std::size_t> rows) {
  ProfileSet out;
  out.grid = data.grid;
  out.profiles.reserve(rows.size());
  for (auto r : rows) out.profiles.push_back(data.profiles[r]);
  if (data.has_fluxes()) {
    out.fluxes.reserve(rows.size());
    for (auto r : rows) out.fluxes.push_back(data.fluxes[r]);
  }
  return out;
}

ProfileSet concat(const ProfileSet& a, const ProfileSet& b) {
  require(a.grid == b.grid, ErrorCategory::schema, "cannot join sets on different grids");
  require(a.has_fluxes() == b.has_fluxes() || a.size() == 0 || b.size() == 0,
          ErrorCategory::schema, "cannot join sets with and without fluxes");
  ProfileSet out = a;
  out.profiles.insert(out.profiles.end(), b.profiles.begin(), b.profiles.end());
  out.fluxes.insert(out.fluxes.end(), b.fluxes.begin(), b.fluxes.end());
  return out;
}

Split split_shuffle(const ProfileSet& data, const SplitSpec& spec) {
  require(data.size() > 0, ErrorCategory::domain, "cannot split an empty profile set");
  const auto sizes = split_sizes(data.size(), spec);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(spec.seed, 0x5b1170ULL);
  shuffle(idx.begin(), idx.end(), rng);
  std::span<const std::size_t> all(idx);
  Split s;
  s.train = subset(data, all.subspan(0, sizes.train));
  s.validation = subset(data, all.subspan(sizes.train, sizes.validation));
  s.test = subset(data, all.subspan(sizes.train + sizes.validation, sizes.test));
  return s;
}

// Surrogate atmosphere ------------------------------------------------------

namespace surrogate {
constexpr double kTopTemperature = 210.0;      // K, near the model top
constexpr double kSurfaceTemperature = 288.0;  // K
constexpr double kOffsetSd = 6.0;              // K, per-profile shift
constexpr double kNoiseSd = 2.0;               // K, marginal sd of AR(1) part
constexpr double kNoiseAr = 0.85;              // lag-1 level correlation
constexpr double kSurfacePressure = 101325.0;  // Pa
constexpr double kSurfacePressureSd = 1200.0;  // Pa
constexpr double kCloudyFraction = 0.4;
constexpr double kCloudTopSigma = 0.35;        // cloud blocks live between
constexpr double kCloudBaseSigma = 0.95;       // these sigma values
constexpr double kCloudLogMean = -0.5;         // lognormal tau_c per level
constexpr double kCloudLogSd = 1.0;
constexpr std::size_t kMaxBlocks = 3;
constexpr std::size_t kMaxBlockLevels = 4;
}  // namespace surrogate

double surrogate_sigma(std::size_t level, std::size_t n_full) {
  const double x = (static_cast<double>(level) + 0.5) / static_cast<double>(n_full);
  return x * x;
}

ProfileSet generate_surrogate(std::size_t n, const LevelGrid& grid, std::uint64_t seed) {
  using namespace surrogate;
  require(n >= 1, ErrorCategory::domain, "surrogate profile count must be >= 1");
  require(grid.n_full >= 1, ErrorCategory::domain, "level grid needs n_full >= 1");
  const auto levels = grid.n_full;

  std::vector<double> sigma(levels);
  for (std::size_t i = 0; i < levels; ++i) sigma[i] = surrogate_sigma(i, levels);
  std::size_t cloud_lo = levels, cloud_hi = 0;  // admissible cloud level range
  for (std::size_t i = 0; i < levels; ++i)
    if (sigma[i] >= kCloudTopSigma && sigma[i] <= kCloudBaseSigma) {
      cloud_lo = std::min(cloud_lo, i);
      cloud_hi = std::max(cloud_hi, i);
    }
  if (cloud_lo > cloud_hi) cloud_lo = cloud_hi = levels - 1;

  ProfileSet set;
  set.grid = grid;
  set.profiles.resize(n);
  const double innov_sd = kNoiseSd * std::sqrt(1.0 - kNoiseAr * kNoiseAr);
  for (std::size_t r = 0; r < n; ++r) {
    CounterRng rng(seed, r);
    auto& prof = set.profiles[r];
    prof.T.resize(levels);
    prof.p.resize(levels);
    prof.tau_c.assign(levels, 0.0);

    const double offset = kOffsetSd * rng.normal();
    double noise = kNoiseSd * rng.normal();
    for (std::size_t i = 0; i < levels; ++i) {
      if (i > 0) noise = kNoiseAr * noise + innov_sd * rng.normal();
      const double shape = std::pow(sigma[i], 0.25);
      const double base = kTopTemperature + (kSurfaceTemperature - kTopTemperature) * shape;
      prof.T[i] = std::max(150.0, base + offset + noise);
    }

    double p0 = kSurfacePressure + kSurfacePressureSd * rng.normal();
    p0 = std::clamp(p0, 95000.0, 106000.0);
    for (std::size_t i = 0; i < levels; ++i) prof.p[i] = sigma[i] * p0;

    if (rng.uniform() < kCloudyFraction) {
      const auto blocks = 1 + rng.below(kMaxBlocks);
      const auto span = cloud_hi - cloud_lo + 1;
      for (std::uint64_t b = 0; b < blocks; ++b) {
        const auto start = cloud_lo + rng.below(span);
        const auto len = 1 + rng.below(kMaxBlockLevels);
        for (std::size_t i = start; i < std::min(start + len, cloud_hi + 1); ++i)
          prof.tau_c[i] = std::exp(kCloudLogMean + kCloudLogSd * rng.normal());
      }
    }
  }
  return set;
}

}  // namespace copaug
