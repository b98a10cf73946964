// SPDX-License-Identifier: Apache-2.0
//
// Multivariate dependence models on pseudo-observations: the Gaussian copula
// and the regular vine (sequential maximum-spanning-tree structure selection
// with per-edge AIC family choice, simulation by inverse Rosenblatt
// transform), plus the marginal + copula synthesis entry points.
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "copaug/bicop.hpp"
#include "copaug/dataset.hpp"
#include "copaug/marginals.hpp"

namespace copaug {

// Gaussian copula ------------------------------------------------------------

struct GaussianCopulaModel {
  std::size_t d = 0;
  Eigen::MatrixXd R;  // correlation matrix
  Eigen::MatrixXd L;  // lower Cholesky factor, L L^T = R
};

/// Eigenvalues below this are lifted before factorization.
inline constexpr double kMinEigenvalue = 1e-6;

GaussianCopulaModel fit_gaussian(const UMatrix& u);
/// Builds the model from a correlation matrix (regularized the same way).
GaussianCopulaModel gaussian_from_correlation(const Eigen::MatrixXd& R);
UMatrix simulate_gaussian(const GaussianCopulaModel& m, std::size_t n, std::uint64_t seed);

// Regular vine ---------------------------------------------------------------

/// Edge of tree t: copula between F(a | cond) and F(b | cond), a < b, with
/// |cond| = t - 1. `left`/`right` index the two nodes it joins in tree t
/// (variables for tree 1, edges of tree t-1 otherwise).
struct VineEdge {
  std::uint32_t a = 0, b = 0;
  std::vector<std::uint32_t> cond;
  std::uint32_t left = 0, right = 0;

  friend bool operator==(const VineEdge&, const VineEdge&) = default;
};

struct VineStructure {
  std::size_t d = 0;
  /// trees[t - 1] holds the d - t edges of tree t.
  std::vector<std::vector<VineEdge>> trees;
  /// Trees deeper than this carry independence copulas.
  std::size_t truncation = 0;

  std::size_t edge_count() const;
  friend bool operator==(const VineStructure&, const VineStructure&) = default;
};

struct VineModel {
  VineStructure structure;
  /// copulas[t - 1][e] belongs to structure.trees[t - 1][e].
  std::vector<std::vector<PairCopula>> copulas;
  /// Empirical tau of each fitted edge's pseudo-data (0 beyond truncation).
  std::vector<std::vector<double>> tau_hat;

  std::size_t parameter_count() const;
};

enum class CopulaKind { gaussian, vine };

std::string_view to_string(CopulaKind k) noexcept;
std::optional<CopulaKind> copula_kind_from_string(std::string_view s) noexcept;

struct CopulaSpec {
  CopulaKind kind = CopulaKind::gaussian;
  std::vector<Family> catalogue = all_families();
  /// Unset: no truncation up to kAutoTruncationDims features, otherwise
  /// kDefaultTruncation.
  std::optional<std::size_t> truncation;
};

inline constexpr std::size_t kAutoTruncationDims = 60;
inline constexpr std::size_t kDefaultTruncation = 5;

std::size_t effective_truncation(const CopulaSpec& spec, std::size_t d);

/// Sequential selection and estimation: tree 1 is the maximum spanning tree
/// on |tau|, every edge is fitted by fit_pair, its h-function outputs feed the
/// next tree, whose candidate edges obey the proximity condition.
VineModel fit_vine(const UMatrix& u, const CopulaSpec& spec);
VineStructure select_structure(const UMatrix& u, std::optional<std::size_t> truncation);

/// Fills trees above those given so the structure is a full regular vine,
/// using the lowest-index spanning tree among proximity-admissible edges.
void complete_structure(VineStructure& s);

/// Straight-line program evaluating the inverse Rosenblatt transform of one
/// row. Slots hold intermediate conditional probabilities.
struct SimulationPlan {
  enum class OpKind : std::uint8_t { uniform, h, hinv };
  struct Op {
    OpKind kind;
    std::uint8_t direction;   // 1 or 2 for h / hinv
    std::uint32_t copula;     // index into `copulas`
    std::uint32_t dst;
    std::uint32_t src;        // argument being transformed
    std::uint32_t cond;       // conditioning value
  };
  std::size_t d = 0;
  std::size_t slots = 0;
  std::vector<PairCopula> copulas;
  std::vector<Op> ops;
  /// Slot holding the unconditional value of each variable.
  std::vector<std::uint32_t> output;
  /// Tree/edge of each copula, for error reporting.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> copula_edge;
};

SimulationPlan compile_plan(const VineModel& m);
UMatrix simulate_vine(const VineModel& m, std::size_t n, std::uint64_t seed);

// Synthesis ------------------------------------------------------------------

/// Marginals plus a copula over the non-constant features of an input matrix.
struct SynthesisModel {
  CopulaKind kind = CopulaKind::gaussian;
  LevelGrid grid;
  std::vector<ColumnLabel> labels;
  std::vector<EmpiricalMarginal> marginals;
  /// Features whose training column is not constant; the copula's
  /// dimension equals active.size().
  std::vector<std::size_t> active;
  GaussianCopulaModel gaussian;
  VineModel vine;
};

SynthesisModel fit_synthesis(const ProfileSet& train, const CopulaSpec& spec);
/// Simulated input matrix in original units.
DataMatrix sample_synthesis(const SynthesisModel& m, std::size_t n, std::uint64_t seed);

struct SynthesisDiagnostics {
  /// Profiles whose pressure column had to be re-sorted.
  std::size_t pressure_resorted = 0;
};

/// Profiles from a sampled matrix; pressures are sorted ascending wherever the
/// jointly sampled levels came out non-monotone.
ProfileSet to_profiles(const DataMatrix& x, const LevelGrid& grid,
                       SynthesisDiagnostics* diag = nullptr);

ProfileSet synthesize(const ProfileSet& train, const CopulaSpec& spec, std::size_t factor,
                      std::uint64_t seed, SynthesisDiagnostics* diag = nullptr);

inline constexpr int kArtifactVersion = 1;

void save_synthesis(const std::filesystem::path& path, const SynthesisModel& m);
SynthesisModel load_synthesis(const std::filesystem::path& path);

}  // namespace copaug
