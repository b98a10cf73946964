// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration and the command layer behind the CLI: data
// preparation, copula fitting and sampling, labeling with the radiation
// model, emulator training and evaluation, and the full repeat protocol.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "copaug/dataset.hpp"
#include "copaug/emulator.hpp"
#include "copaug/evaluation.hpp"
#include "copaug/multicop.hpp"
#include "copaug/radiation.hpp"

namespace copaug {

struct ExperimentConfig {
  /// Profile file to use instead of the surrogate generator.
  std::filesystem::path data_input;
  std::size_t n_profiles = 25000;
  std::size_t n_levels = 137;
  double train_fraction = 0.4;
  double validation_fraction = 0.2;
  double test_fraction = 0.4;
  std::vector<CopulaSpec> copulas{CopulaSpec{CopulaKind::gaussian},
                                  CopulaSpec{CopulaKind::vine}};
  std::vector<std::size_t> factors{1, 5, 10};
  std::size_t generation_repeats = 10;
  std::size_t training_repeats = 10;
  /// Training repeats of the baseline case; defaults to training_repeats.
  std::optional<std::size_t> baseline_repeats;
  std::vector<std::size_t> hidden{512, 512, 512};
  TrainConfig training;
  RadiationConstants radiation;
  std::uint64_t master_seed = 0;
  std::size_t projection_iterations = 100;
  bool reports = true;
  bool save_models = false;
  bool cache_synthetic = true;

  std::size_t baseline_runs() const { return baseline_repeats.value_or(training_repeats); }
};

/// Throws Error(config) on any invalid field.
void validate(const ExperimentConfig& cfg);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string case_label(CopulaKind kind, std::size_t factor);
inline constexpr const char* kBaselineLabel = "baseline";

/// Seeds: data generation, split shuffle, synthesis per (case, generation),
/// network initialization and batch order per (case, generation, training).
std::uint64_t data_seed(const ExperimentConfig& cfg);
std::uint64_t split_seed(const ExperimentConfig& cfg);
std::uint64_t synthesis_seed(const ExperimentConfig& cfg, const std::string& label,
                             std::size_t generation);
std::uint64_t training_seed(const ExperimentConfig& cfg, const std::string& label,
                            std::size_t generation, std::size_t training);

/// Configured profile file or a surrogate set of n_profiles x n_levels.
ProfileSet load_or_generate(const ExperimentConfig& cfg);
/// Shuffled, split and radiated real data.
Split prepare_splits(const ExperimentConfig& cfg, const ProfileSet& data);

struct RunOutcome {
  MetricRow row;
  ErrorMetrics metrics;
  MLPModel model;
};

/// Trains one emulator on `train` (with fluxes) and evaluates it on `test`.
RunOutcome train_and_evaluate(const ExperimentConfig& cfg, const ProfileSet& train,
                              const ProfileSet& validation, const ProfileSet& test,
                              std::uint64_t seed);

struct CaseResult {
  std::string label;
  std::vector<MetricRow> rows;
  std::string failure;  // empty when every run succeeded
  /// Per-level error quantiles pooled over all runs of the case.
  std::vector<LevelBand> per_level;
};

struct PipelineResult {
  std::vector<CaseResult> cases;
  std::vector<std::filesystem::path> artifacts;
};

/// Records output files and the config hash in <out>/manifest.json.
void update_manifest(const std::filesystem::path& out_dir, const ExperimentConfig& cfg,
                     const std::vector<std::filesystem::path>& artifacts);

std::filesystem::path cmd_gen_data(const ExperimentConfig& cfg,
                                   const std::filesystem::path& out_dir, std::ostream& log);
std::filesystem::path cmd_fit(const ExperimentConfig& cfg, CopulaKind kind,
                              const std::filesystem::path& out_dir, std::ostream& log);
std::filesystem::path cmd_sample(const ExperimentConfig& cfg, const std::filesystem::path& model,
                                 std::size_t factor, std::size_t generation,
                                 const std::filesystem::path& out_dir, std::ostream& log);
std::filesystem::path cmd_radiate(const ExperimentConfig& cfg, const std::filesystem::path& input,
                                  const std::filesystem::path& out_dir, std::ostream& log);
/// Trains on the configured real training split plus, optionally, a radiated
/// synthetic profile file.
std::filesystem::path cmd_train(const ExperimentConfig& cfg, const std::string& label,
                                std::size_t generation, std::size_t training,
                                const std::optional<std::filesystem::path>& synthetic,
                                const std::filesystem::path& out_dir, std::ostream& log);
/// Evaluates a saved network on a radiated test file; writes metric rows
/// and per-level error quantiles.
std::filesystem::path cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& model,
                               const std::filesystem::path& test, const std::string& label,
                               std::size_t repeat, const std::filesystem::path& out_dir,
                               std::ostream& log);
/// Runs every case, or only `only_case` when given.
PipelineResult cmd_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            std::ostream& log,
                            const std::optional<std::string>& only_case = std::nullopt);

}  // namespace copaug
