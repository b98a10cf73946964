// SPDX-License-Identifier: Apache-2.0
//
// copaug: command-line front end for the augmentation experiment.
#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "copaug/error.hpp"
#include "copaug/pipeline.hpp"

namespace fs = std::filesystem;
using namespace copaug;

int main(int argc, char** argv) {
  CLI::App app{"Copula-based training-set augmentation for radiation emulators"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string case_name;
  app.add_option("--config", config_path, "Experiment config (JSON); defaults when omitted");
  app.add_option("--seed", seed, "Master seed, overrides the config");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--case", case_name, "Case label, e.g. baseline or gaussian_x10");

  auto* gen = app.add_subcommand("gen-data", "Write a surrogate profile file");

  std::string kind_name = "gaussian";
  auto* fit = app.add_subcommand("fit", "Fit marginals and a copula on the training split");
  fit->add_option("--kind", kind_name, "gaussian or vine")->capture_default_str();

  std::string model_path;
  std::size_t factor = 1, generation = 0, training = 0, repeat = 0;
  auto* sample = app.add_subcommand("sample", "Sample synthetic profiles from a fitted model");
  sample->add_option("--model", model_path, "Model artifact from `fit`")->required();
  sample->add_option("--factor", factor, "Augmentation factor")->capture_default_str();
  sample->add_option("--generation", generation, "Generation repeat index")->capture_default_str();

  std::string input_path;
  auto* radiate = app.add_subcommand("radiate", "Label a profile file with downwelling fluxes");
  radiate->add_option("--in", input_path, "Profile file")->required();

  std::string synthetic_path;
  auto* train = app.add_subcommand("train", "Train one emulator");
  train->add_option("--synthetic", synthetic_path, "Synthetic profiles to add to the real split");
  train->add_option("--generation", generation, "Generation repeat index")->capture_default_str();
  train->add_option("--training", training, "Training repeat index")->capture_default_str();

  std::string test_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained emulator");
  eval->add_option("--model", model_path, "Network artifact from `train`")->required();
  eval->add_option("--test", test_path, "Test profile file")->required();
  eval->add_option("--repeat", repeat, "Repeat index recorded in the rows")->capture_default_str();

  auto* pipeline = app.add_subcommand("pipeline", "Run the full experiment");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (seed) cfg.master_seed = *seed;
    validate(cfg);
    const fs::path out(out_dir);
    auto& log = std::cerr;

    if (gen->parsed()) {
      cmd_gen_data(cfg, out, log);
    } else if (fit->parsed()) {
      auto kind = copula_kind_from_string(kind_name);
      require(kind.has_value(), ErrorCategory::config, "unknown copula kind '" + kind_name + "'");
      cmd_fit(cfg, *kind, out, log);
    } else if (sample->parsed()) {
      cmd_sample(cfg, model_path, factor, generation, out, log);
    } else if (radiate->parsed()) {
      cmd_radiate(cfg, input_path, out, log);
    } else if (train->parsed()) {
      const std::string label = case_name.empty() ? kBaselineLabel : case_name;
      std::optional<fs::path> synth;
      if (!synthetic_path.empty()) synth = synthetic_path;
      cmd_train(cfg, label, generation, training, synth, out, log);
    } else if (eval->parsed()) {
      cmd_eval(cfg, model_path, test_path, case_name.empty() ? kBaselineLabel : case_name, repeat,
               out, log);
    } else if (pipeline->parsed()) {
      std::optional<std::string> only;
      if (!case_name.empty()) only = case_name;
      const auto result = cmd_pipeline(cfg, out, log, only);
      for (const auto& c : result.cases)
        if (!c.failure.empty()) return 3;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.category()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: io: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
