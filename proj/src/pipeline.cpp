// SPDX-License-Identifier: Apache-2.0
#include "copaug/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "copaug/error.hpp"
#include "copaug/kernels.hpp"
#include "copaug/rng.hpp"
#include "json.hpp"
#include "text_io.hpp"

namespace copaug {

namespace fs = std::filesystem;
using nlohmann::json;

// Config -----------------------------------------------------------------------

void validate(const ExperimentConfig& cfg) {
  auto check = [](bool ok, const std::string& msg) { require(ok, ErrorCategory::config, msg); };
  check(cfg.n_levels >= 1, "n_levels must be >= 1");
  check(cfg.n_profiles >= 3, "n_profiles must be >= 3");
  check(cfg.train_fraction > 0 && cfg.validation_fraction > 0 && cfg.test_fraction > 0,
        "split fractions must be positive");
  check(cfg.train_fraction + cfg.validation_fraction + cfg.test_fraction <= 1.0 + 1e-12,
        "split fractions sum to more than 1");
  check(!cfg.copulas.empty() ? !cfg.factors.empty() : true,
        "augmented cases need at least one factor");
  for (auto f : cfg.factors) check(f == 1 || f == 5 || f == 10, "factors must be 1, 5 or 10");
  std::set<CopulaKind> kinds;
  for (const auto& c : cfg.copulas) {
    check(kinds.insert(c.kind).second, "copula kinds must be distinct");
    check(c.kind == CopulaKind::gaussian || !c.catalogue.empty(),
          "vine catalogue must be nonempty");
  }
  check(cfg.generation_repeats >= 1 && cfg.training_repeats >= 1 && cfg.baseline_runs() >= 1,
        "repeats must be >= 1");
  for (auto w : cfg.hidden) check(w >= 1, "hidden widths must be >= 1");
  validate(cfg.training);
  check(cfg.radiation.sigma_sb > 0 && cfg.radiation.diffusivity > 0 &&
            cfg.radiation.tau_gas >= 0,
        "radiation constants must be positive");
  check(cfg.projection_iterations >= 1, "projection_iterations must be >= 1");
}

namespace {

json copula_json(const CopulaSpec& s) {
  json j{{"kind", std::string(to_string(s.kind))}};
  if (s.kind == CopulaKind::vine) {
    json fams = json::array();
    for (auto f : s.catalogue) fams.push_back(std::string(to_string(f)));
    j["families"] = fams;
    j["truncation"] = s.truncation ? json(*s.truncation) : json(nullptr);
  }
  return j;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  require(j.is_object(), ErrorCategory::config, where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    require(known, ErrorCategory::config, "unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

CopulaSpec copula_from_json(const json& j) {
  reject_unknown(j, {"kind", "families", "truncation"}, "copula");
  CopulaSpec s;
  auto kind = copula_kind_from_string(j.at("kind").get<std::string>());
  require(kind.has_value(), ErrorCategory::config,
          "unknown copula kind '" + j.at("kind").get<std::string>() + "'");
  s.kind = *kind;
  if (j.contains("families")) {
    s.catalogue.clear();
    for (const auto& f : j.at("families")) {
      auto fam = family_from_string(f.get<std::string>());
      require(fam.has_value(), ErrorCategory::config,
              "unknown family '" + f.get<std::string>() + "'");
      s.catalogue.push_back(*fam);
    }
  }
  if (j.contains("truncation") && !j.at("truncation").is_null())
    s.truncation = j.at("truncation").get<std::size_t>();
  return s;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["version"] = 1;
  j["data"] = {{"input", cfg.data_input.string()},
               {"n_profiles", cfg.n_profiles},
               {"n_levels", cfg.n_levels}};
  j["split"] = {{"train", cfg.train_fraction},
                {"validation", cfg.validation_fraction},
                {"test", cfg.test_fraction}};
  json cops = json::array();
  for (const auto& c : cfg.copulas) cops.push_back(copula_json(c));
  j["copulas"] = cops;
  j["factors"] = cfg.factors;
  j["generation_repeats"] = cfg.generation_repeats;
  j["training_repeats"] = cfg.training_repeats;
  j["baseline_repeats"] = cfg.baseline_repeats ? json(*cfg.baseline_repeats) : json(nullptr);
  j["network"] = {{"hidden", cfg.hidden}};
  const auto& t = cfg.training;
  j["training"] = {{"epochs", t.epochs},         {"patience", t.patience},
                   {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
                   {"beta1", t.beta1},           {"beta2", t.beta2},
                   {"epsilon", t.epsilon},       {"huber_delta", t.huber_delta}};
  j["radiation"] = {{"sigma_sb", cfg.radiation.sigma_sb},
                    {"diffusivity", cfg.radiation.diffusivity},
                    {"tau_gas", cfg.radiation.tau_gas}};
  j["master_seed"] = cfg.master_seed;
  j["reports"] = {{"enabled", cfg.reports}, {"projection_iterations", cfg.projection_iterations}};
  j["save_models"] = cfg.save_models;
  j["cache_synthetic"] = cfg.cache_synthetic;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig cfg;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown(j,
                   {"version", "data", "split", "copulas", "factors", "generation_repeats",
                    "training_repeats", "baseline_repeats", "network", "training", "radiation",
                    "master_seed", "reports", "save_models", "cache_synthetic"},
                   "config");
    if (j.contains("version"))
      require(j.at("version").get<int>() == 1, ErrorCategory::config,
              "unsupported config version");
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"input", "n_profiles", "n_levels"}, "data");
      std::string input;
      read(d, "input", input);
      cfg.data_input = input;
      read(d, "n_profiles", cfg.n_profiles);
      read(d, "n_levels", cfg.n_levels);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      reject_unknown(s, {"train", "validation", "test"}, "split");
      read(s, "train", cfg.train_fraction);
      read(s, "validation", cfg.validation_fraction);
      read(s, "test", cfg.test_fraction);
    }
    if (j.contains("copulas")) {
      cfg.copulas.clear();
      for (const auto& c : j.at("copulas")) cfg.copulas.push_back(copula_from_json(c));
    }
    read(j, "factors", cfg.factors);
    read(j, "generation_repeats", cfg.generation_repeats);
    read(j, "training_repeats", cfg.training_repeats);
    if (j.contains("baseline_repeats") && !j.at("baseline_repeats").is_null())
      cfg.baseline_repeats = j.at("baseline_repeats").get<std::size_t>();
    if (j.contains("network")) {
      reject_unknown(j.at("network"), {"hidden"}, "network");
      read(j.at("network"), "hidden", cfg.hidden);
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      reject_unknown(t,
                     {"epochs", "patience", "batch_size", "learning_rate", "beta1", "beta2",
                      "epsilon", "huber_delta"},
                     "training");
      read(t, "epochs", cfg.training.epochs);
      read(t, "patience", cfg.training.patience);
      read(t, "batch_size", cfg.training.batch_size);
      read(t, "learning_rate", cfg.training.learning_rate);
      read(t, "beta1", cfg.training.beta1);
      read(t, "beta2", cfg.training.beta2);
      read(t, "epsilon", cfg.training.epsilon);
      read(t, "huber_delta", cfg.training.huber_delta);
    }
    if (j.contains("radiation")) {
      const auto& r = j.at("radiation");
      reject_unknown(r, {"sigma_sb", "diffusivity", "tau_gas"}, "radiation");
      read(r, "sigma_sb", cfg.radiation.sigma_sb);
      read(r, "diffusivity", cfg.radiation.diffusivity);
      read(r, "tau_gas", cfg.radiation.tau_gas);
    }
    read(j, "master_seed", cfg.master_seed);
    if (j.contains("reports")) {
      const auto& r = j.at("reports");
      reject_unknown(r, {"enabled", "projection_iterations"}, "reports");
      read(r, "enabled", cfg.reports);
      read(r, "projection_iterations", cfg.projection_iterations);
    }
    read(j, "save_models", cfg.save_models);
    read(j, "cache_synthetic", cfg.cache_synthetic);
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config_to_json(cfg))));
  return buf;
}

std::string case_label(CopulaKind kind, std::size_t factor) {
  return std::string(to_string(kind)) + "_x" + std::to_string(factor);
}

std::uint64_t data_seed(const ExperimentConfig& cfg) {
  return derive_seed(cfg.master_seed, "data", 0, 0);
}

std::uint64_t split_seed(const ExperimentConfig& cfg) {
  return derive_seed(cfg.master_seed, "split", 0, 0);
}

std::uint64_t synthesis_seed(const ExperimentConfig& cfg, const std::string& label,
                             std::size_t generation) {
  return derive_seed(cfg.master_seed, "synthesis/" + label, generation, 0);
}

std::uint64_t training_seed(const ExperimentConfig& cfg, const std::string& label,
                            std::size_t generation, std::size_t training) {
  return derive_seed(cfg.master_seed, "training/" + label, generation, training);
}

// Data ---------------------------------------------------------------------------

ProfileSet load_or_generate(const ExperimentConfig& cfg) {
  if (!cfg.data_input.empty()) return load_profiles(cfg.data_input, LevelGrid{cfg.n_levels});
  return generate_surrogate(cfg.n_profiles, LevelGrid{cfg.n_levels}, data_seed(cfg));
}

Split prepare_splits(const ExperimentConfig& cfg, const ProfileSet& data) {
  SplitSpec spec{cfg.train_fraction, cfg.validation_fraction, cfg.test_fraction, split_seed(cfg)};
  Split s = split_shuffle(data, spec);
  s.train = radiate_set(s.train, cfg.radiation);
  s.validation = radiate_set(s.validation, cfg.radiation);
  s.test = radiate_set(s.test, cfg.radiation);
  return s;
}

RunOutcome train_and_evaluate(const ExperimentConfig& cfg, const ProfileSet& train_set,
                              const ProfileSet& validation, const ProfileSet& test,
                              std::uint64_t seed) {
  require(train_set.has_fluxes() && validation.has_fluxes() && test.has_fluxes(),
          ErrorCategory::domain, "training and evaluation sets must carry fluxes");
  const LevelGrid grid = train_set.grid;
  MLPLayout layout{3 * grid.n_full, cfg.hidden, grid.n_half()};
  TrainConfig tc = cfg.training;
  tc.seed = mix64(seed ^ 0x7a11);
  RunOutcome out;
  out.model = train(init_mlp(layout, seed), to_matrix(flatten(train_set, Which::inputs)),
                    to_matrix(flatten(train_set, Which::outputs)),
                    to_matrix(flatten(validation, Which::inputs)),
                    to_matrix(flatten(validation, Which::outputs)), tc);
  out.metrics = error_metrics(flatten(test, Which::outputs), predict_set(out.model, test));
  out.row.mb = out.metrics.mb;
  out.row.mae = out.metrics.mae;
  return out;
}

// Outputs ------------------------------------------------------------------------

void update_manifest(const fs::path& out_dir, const ExperimentConfig& cfg,
                     const std::vector<fs::path>& artifacts) {
  const fs::path path = out_dir / "manifest.json";
  const std::string hash = config_hash(cfg);
  std::set<std::string> entries;
  if (fs::exists(path)) {
    try {
      std::ifstream in(path);
      json old;
      in >> old;
      if (old.at("config_hash") == hash)
        for (const auto& a : old.at("artifacts")) entries.insert(a.get<std::string>());
    } catch (const json::exception&) {
    }
  }
  for (const auto& a : artifacts) {
    const auto rel = a.lexically_relative(out_dir);
    entries.insert((rel.empty() ? a : rel).generic_string());
  }
  json j{{"config_hash", hash}, {"artifacts", entries}};
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorCategory::io, "failed writing " + path.string());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

std::vector<LevelBand> median_bands(const std::vector<std::vector<LevelBand>>& runs) {
  if (runs.empty()) return {};
  std::vector<LevelBand> out(runs.front().size());
  std::vector<double> lo, mid, hi;
  for (std::size_t l = 0; l < out.size(); ++l) {
    lo.clear();
    mid.clear();
    hi.clear();
    for (const auto& r : runs) {
      lo.push_back(r[l].low);
      mid.push_back(r[l].mid);
      hi.push_back(r[l].high);
    }
    out[l] = {l, median_of(lo), median_of(mid), median_of(hi)};
  }
  return out;
}

std::string summary_table(const std::vector<CaseResult>& cases) {
  std::string s = "case,runs,median_MB,median_abs_MB,median_MAE,MAE_q25,MAE_q75,MAE_min,MAE_max\n";
  for (const auto& c : cases) {
    if (c.rows.empty()) continue;
    std::vector<double> mb, amb, mae;
    for (const auto& r : c.rows) {
      mb.push_back(r.mb);
      amb.push_back(std::abs(r.mb));
      mae.push_back(r.mae);
    }
    std::sort(mae.begin(), mae.end());
    s += c.label + ',' + std::to_string(c.rows.size());
    for (double v : {median_of(mb), median_of(amb), quantile_sorted(mae, 0.5),
                     quantile_sorted(mae, 0.25), quantile_sorted(mae, 0.75), mae.front(),
                     mae.back()}) {
      s += ',';
      detail::append_double(s, v);
    }
    s += '\n';
  }
  return s;
}

constexpr std::size_t kDepthCurves = 1000;

DataMatrix temperature_curves(const ProfileSet& set) {
  const std::size_t n = std::min(set.size(), kDepthCurves);
  DataMatrix m(n, set.grid.n_full);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < set.grid.n_full; ++c) m(r, c) = set.profiles[r].T[c];
  return m;
}

void depth_reports(const ProfileSet& set, const std::string& name, const fs::path& dir,
                   std::vector<fs::path>& artifacts) {
  const DataMatrix curves = temperature_curves(set);
  if (curves.rows() < 3) return;
  const auto ranking = depth_groups(band_depth(curves));
  for (auto [frac, tag] : {std::pair{0.25, "25"}, std::pair{0.5, "50"}}) {
    const auto path = dir / ("depth_" + name + "_T_" + tag + ".csv");
    write_level_bands(path, depth_envelope(curves, ranking, frac));
    artifacts.push_back(path);
  }
}

struct TrainJob {
  std::size_t generation = 0;
  std::size_t training = 0;
  const ProfileSet* train = nullptr;
};

// Trains every job; outcomes are returned in job order regardless of
// scheduling.
std::vector<RunOutcome> run_jobs(const ExperimentConfig& cfg, const std::string& label,
                                 const std::vector<TrainJob>& jobs, const Split& real) {
  std::vector<RunOutcome> out(jobs.size());
  std::vector<std::string> errors(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(jobs.size()); ++k) {
    const auto& job = jobs[static_cast<std::size_t>(k)];
    try {
      out[k] = train_and_evaluate(cfg, *job.train, real.validation, real.test,
                                  training_seed(cfg, label, job.generation, job.training));
    } catch (const std::exception& e) {
      errors[k] = "generation " + std::to_string(job.generation) + ", training repeat " +
                  std::to_string(job.training) + ": " + e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) fail(ErrorCategory::convergence, e);
  return out;
}

}  // namespace

// Commands -----------------------------------------------------------------------

fs::path cmd_gen_data(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  validate(cfg);
  fs::create_directories(out_dir);
  const auto set = generate_surrogate(cfg.n_profiles, LevelGrid{cfg.n_levels}, data_seed(cfg));
  const auto path = out_dir / "profiles.csv";
  save_profiles(path, set);
  update_manifest(out_dir, cfg, {path});
  log << "gen-data: " << set.size() << " rows, " << 3 * cfg.n_levels << " input columns -> "
      << path.string() << '\n';
  return path;
}

namespace {

CopulaSpec spec_for(const ExperimentConfig& cfg, CopulaKind kind) {
  for (const auto& c : cfg.copulas)
    if (c.kind == kind) return c;
  return CopulaSpec{kind};
}

void log_fit(const SynthesisModel& m, std::ostream& log) {
  log << "fit: " << to_string(m.kind) << ", " << m.marginals.size() << " features, "
      << m.active.size() << " non-constant\n";
  if (m.kind != CopulaKind::vine) return;
  std::map<std::string, std::size_t> hist;
  for (const auto& tree : m.vine.copulas)
    for (const auto& c : tree) ++hist[std::string(to_string(c.family))];
  log << "fit: truncation " << m.vine.structure.truncation << ", "
      << m.vine.parameter_count() << " parameters; families:";
  for (const auto& [name, count] : hist) log << ' ' << name << '=' << count;
  log << '\n';
}

}  // namespace

fs::path cmd_fit(const ExperimentConfig& cfg, CopulaKind kind, const fs::path& out_dir,
                 std::ostream& log) {
  validate(cfg);
  fs::create_directories(out_dir);
  const auto split =
      split_shuffle(load_or_generate(cfg), SplitSpec{cfg.train_fraction, cfg.validation_fraction,
                                                     cfg.test_fraction, split_seed(cfg)});
  const auto model = fit_synthesis(split.train, spec_for(cfg, kind));
  log_fit(model, log);
  const auto path = out_dir / ("model_" + std::string(to_string(kind)) + ".json");
  save_synthesis(path, model);
  update_manifest(out_dir, cfg, {path});
  log << "fit: wrote " << path.string() << '\n';
  return path;
}

fs::path cmd_sample(const ExperimentConfig& cfg, const fs::path& model_path, std::size_t factor,
                    std::size_t generation, const fs::path& out_dir, std::ostream& log) {
  validate(cfg);
  require(factor >= 1, ErrorCategory::config, "factor must be >= 1");
  fs::create_directories(out_dir);
  const auto model = load_synthesis(model_path);
  require(!model.marginals.empty(), ErrorCategory::schema, "model has no features");
  const std::string label = case_label(model.kind, factor);
  const std::size_t n = factor * model.marginals.front().size();
  SynthesisDiagnostics diag;
  const auto set = to_profiles(
      sample_synthesis(model, n, synthesis_seed(cfg, label, generation)), model.grid, &diag);
  const auto path = out_dir / ("synthetic_" + label + "_g" + std::to_string(generation) + ".csv");
  save_profiles(path, set);
  update_manifest(out_dir, cfg, {path});
  log << "sample: " << n << " profiles (" << diag.pressure_resorted
      << " pressure columns re-sorted) -> " << path.string() << '\n';
  return path;
}

fs::path cmd_radiate(const ExperimentConfig& cfg, const fs::path& input, const fs::path& out_dir,
                     std::ostream& log) {
  validate(cfg);
  fs::create_directories(out_dir);
  const auto set = radiate_set(load_profiles(input), cfg.radiation);
  const auto path = out_dir / (input.stem().string() + "_radiated.csv");
  save_profiles(path, set);
  update_manifest(out_dir, cfg, {path});
  log << "radiate: " << set.size() << " profiles -> " << path.string() << '\n';
  return path;
}

fs::path cmd_train(const ExperimentConfig& cfg, const std::string& label, std::size_t generation,
                   std::size_t training, const std::optional<fs::path>& synthetic,
                   const fs::path& out_dir, std::ostream& log) {
  validate(cfg);
  fs::create_directories(out_dir / "models");
  const auto real = prepare_splits(cfg, load_or_generate(cfg));
  ProfileSet train_set = real.train;
  if (synthetic) {
    auto extra = load_profiles(*synthetic, real.train.grid);
    if (!extra.has_fluxes()) extra = radiate_set(extra, cfg.radiation);
    train_set = concat(train_set, extra);
  }
  const auto outcome = train_and_evaluate(cfg, train_set, real.validation, real.test,
                                          training_seed(cfg, label, generation, training));
  const auto path = out_dir / "models" /
                    (label + "_g" + std::to_string(generation) + "_t" + std::to_string(training) +
                     ".json");
  save_mlp(path, outcome.model);
  update_manifest(out_dir, cfg, {path});
  log << "train: " << label << " on " << train_set.size() << " profiles, best epoch "
      << outcome.model.best_epoch << " of " << outcome.model.history.size() << ", test MAE "
      << detail::format_double(outcome.row.mae) << " -> " << path.string() << '\n';
  return path;
}

fs::path cmd_eval(const ExperimentConfig& cfg, const fs::path& model_path, const fs::path& test,
                  const std::string& label, std::size_t repeat, const fs::path& out_dir,
                  std::ostream& log) {
  validate(cfg);
  fs::create_directories(out_dir);
  const auto model = load_mlp(model_path);
  auto set = load_profiles(test);
  if (!set.has_fluxes()) set = radiate_set(set, cfg.radiation);
  const auto metrics = error_metrics(flatten(set, Which::outputs), predict_set(model, set));
  const MetricRow row{label, repeat, metrics.mb, metrics.mae};
  const std::string tag = label + "_r" + std::to_string(repeat);
  const auto path = out_dir / ("metrics_" + tag + ".csv");
  write_metric_rows(path, std::span(&row, 1));
  const auto levels = out_dir / ("errors_" + tag + ".csv");
  write_level_bands(levels, metrics.per_level);
  update_manifest(out_dir, cfg, {path, levels});
  log << "eval: " << label << " repeat " << repeat << " MB " << detail::format_double(row.mb)
      << " MAE " << detail::format_double(row.mae) << '\n';
  return path;
}

PipelineResult cmd_pipeline(const ExperimentConfig& cfg, const fs::path& out_dir,
                            std::ostream& log, const std::optional<std::string>& only_case) {
  validate(cfg);
  const fs::path reports = out_dir / "reports";
  const fs::path cache = out_dir / "cache";
  const fs::path models = out_dir / "models";
  fs::create_directories(out_dir);
  if (cfg.reports) fs::create_directories(reports);
  if (cfg.cache_synthetic) fs::create_directories(cache);
  if (cfg.save_models) fs::create_directories(models);

  PipelineResult result;
  auto& artifacts = result.artifacts;
  const fs::path config_copy = out_dir / "config.json";
  write_text(config_copy, config_to_json(cfg) + "\n");
  artifacts.push_back(config_copy);

  const auto real = prepare_splits(cfg, load_or_generate(cfg));
  log << "pipeline: train " << real.train.size() << ", validation " << real.validation.size()
      << ", test " << real.test.size() << " profiles, " << cfg.n_levels << " levels\n";
  if (cfg.reports) depth_reports(real.test, "real", reports, artifacts);

  auto wanted = [&](const std::string& label) { return !only_case || *only_case == label; };
  auto finish_run = [&](CaseResult& c, RunOutcome& o, std::size_t repeat,
                        std::vector<std::vector<LevelBand>>& bands) {
    o.row.case_label = c.label;
    o.row.repeat = repeat;
    c.rows.push_back(o.row);
    log << "pipeline: " << c.label << " repeat " << repeat << ": " << o.model.history.size()
        << " epochs (best " << o.model.best_epoch << "), MAE " << detail::format_double(o.row.mae)
        << ", MB " << detail::format_double(o.row.mb) << '\n';
    bands.push_back(std::move(o.metrics.per_level));
    if (cfg.save_models)
      save_mlp(models / (c.label + "_r" + std::to_string(repeat) + ".json"), o.model);
  };

  if (wanted(kBaselineLabel)) {
    CaseResult c{kBaselineLabel, {}, {}, {}};
    std::vector<std::vector<LevelBand>> bands;
    try {
      std::vector<TrainJob> jobs;
      for (std::size_t t = 0; t < cfg.baseline_runs(); ++t) jobs.push_back({0, t, &real.train});
      auto runs = run_jobs(cfg, c.label, jobs, real);
      for (std::size_t t = 0; t < runs.size(); ++t) finish_run(c, runs[t], t, bands);
      log << "pipeline: baseline done (" << c.rows.size() << " runs)\n";
    } catch (const std::exception& e) {
      c.rows.clear();
      c.failure = e.what();
      log << "pipeline: case baseline aborted: " << e.what() << '\n';
    }
    c.per_level = median_bands(bands);
    result.cases.push_back(std::move(c));
  }

  for (const auto& spec : cfg.copulas) {
    std::vector<std::size_t> factors;
    for (auto f : cfg.factors)
      if (wanted(case_label(spec.kind, f))) factors.push_back(f);
    if (factors.empty()) continue;

    std::optional<SynthesisModel> model;
    std::string fit_error;
    try {
      model = fit_synthesis(real.train, spec);
      log_fit(*model, log);
    } catch (const std::exception& e) {
      fit_error = std::string("fit: ") + e.what();
    }

    for (std::size_t fi = 0; fi < factors.size(); ++fi) {
      const std::size_t factor = factors[fi];
      CaseResult c{case_label(spec.kind, factor), {}, fit_error, {}};
      std::vector<std::vector<LevelBand>> bands;
      if (!model) {
        log << "pipeline: case " << c.label << " aborted: " << fit_error << '\n';
        result.cases.push_back(std::move(c));
        continue;
      }
      try {
        // Generations are trained in chunks so that idle threads can take
        // runs of the next generation while memory stays bounded.
        const std::size_t chunk = std::max<std::size_t>(
            1, static_cast<std::size_t>(kernels::thread_count()) / cfg.training_repeats);
        for (std::size_t g0 = 0; g0 < cfg.generation_repeats; g0 += chunk) {
          const std::size_t g1 = std::min(cfg.generation_repeats, g0 + chunk);
          std::vector<ProfileSet> sets;
          std::vector<std::size_t> resorted;
          for (std::size_t g = g0; g < g1; ++g) {
            SynthesisDiagnostics diag;
            const auto x = sample_synthesis(*model, factor * real.train.size(),
                                            synthesis_seed(cfg, c.label, g));
            const auto synth = radiate_set(to_profiles(x, real.train.grid, &diag), cfg.radiation);
            if (cfg.cache_synthetic) {
              const auto path = cache / (c.label + "_g" + std::to_string(g) + ".csv");
              save_profiles(path, synth);
              artifacts.push_back(path);
            }
            if (cfg.reports && fi == 0 && g == 0) {
              const std::string kind(to_string(spec.kind));
              const auto rep = random_projection_report(
                  flatten(real.train, Which::inputs), x, cfg.projection_iterations,
                  derive_seed(cfg.master_seed, "projection", 0, 0));
              const auto path = reports / ("projection_" + kind + ".csv");
              write_projection_report(path, rep);
              artifacts.push_back(path);
              depth_reports(synth, kind, reports, artifacts);
            }
            sets.push_back(concat(real.train, synth));
            resorted.push_back(diag.pressure_resorted);
          }
          std::vector<TrainJob> jobs;
          for (std::size_t g = g0; g < g1; ++g)
            for (std::size_t t = 0; t < cfg.training_repeats; ++t)
              jobs.push_back({g, t, &sets[g - g0]});
          auto runs = run_jobs(cfg, c.label, jobs, real);
          for (std::size_t k = 0; k < runs.size(); ++k)
            finish_run(c, runs[k], jobs[k].generation * cfg.training_repeats + jobs[k].training,
                       bands);
          for (std::size_t g = g0; g < g1; ++g)
            log << "pipeline: " << c.label << " generation " << g << " done ("
                << resorted[g - g0] << " pressure columns re-sorted)\n";
        }
      } catch (const std::exception& e) {
        c.rows.clear();
        bands.clear();
        c.failure = e.what();
        log << "pipeline: case " << c.label << " aborted: " << e.what() << '\n';
      }
      c.per_level = median_bands(bands);
      result.cases.push_back(std::move(c));
    }
  }

  std::vector<MetricRow> rows;
  std::string failures = "case,reason\n";
  bool any_failure = false;
  for (const auto& c : result.cases) {
    rows.insert(rows.end(), c.rows.begin(), c.rows.end());
    if (!c.failure.empty()) {
      any_failure = true;
      std::string reason = c.failure;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      failures += c.label + ',' + reason + '\n';
    }
    if (cfg.reports && !c.per_level.empty()) {
      const auto path = reports / ("errors_" + c.label + ".csv");
      write_level_bands(path, c.per_level);
      artifacts.push_back(path);
    }
  }
  const auto results_path = out_dir / "results.csv";
  write_metric_rows(results_path, rows);
  artifacts.push_back(results_path);
  const auto summary_path = out_dir / "summary.csv";
  write_text(summary_path, summary_table(result.cases));
  artifacts.push_back(summary_path);
  if (any_failure) {
    const auto path = out_dir / "failures.csv";
    write_text(path, failures);
    artifacts.push_back(path);
  }
  update_manifest(out_dir, cfg, artifacts);
  log << "pipeline: " << rows.size() << " result rows -> " << results_path.string() << '\n';
  return result;
}

}  // namespace copaug
