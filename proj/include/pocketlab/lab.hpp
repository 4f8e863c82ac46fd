#pragma once

// Experiment runner: configuration, the named experiments and their reports.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pocketlab/geometry.hpp"
#include "pocketlab/sde.hpp"

namespace pocketlab {

struct ExperimentConfig {
  std::string experiment;
  std::string output_dir = "out";
  int dimension = 2;
  std::vector<Pocket> pockets;
  std::optional<Pocket> target;
  std::vector<double> amplitudes;
  std::vector<double> eps;
  std::vector<double> delta;
  int paths = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  // Grid nodes per axis, coarse to fine.
  std::vector<int> grid;
  // Start points; an empty list selects the experiment's defaults.
  std::vector<Point> starts;
  int bins = 16;
  double lambda = 1.0;
  int psi_samples = 20;
  int shell_samples = 1000;
  double holding_scale = 1.0;
  double sticky_weight = 1.0;
  // dt0, eta_drift, eta_diff, step_fraction, passage_height and t_max; eps,
  // seed and workers are taken from the fields above.
  SdeConfig sde;
};

const std::vector<std::string>& experiment_names();

// Default configuration of each experiment. Throws UnknownExperiment.
ExperimentConfig default_config(const std::string& experiment);

// Strict parse: unknown keys and wrong types throw ConfigError. Missing keys
// keep the defaults of the experiment named in the document or in
// `experiment`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& experiment);
nlohmann::json to_json(const ExperimentConfig& config);

// Empty iff the configuration is usable; each entry names the field and the
// violated constraint.
std::vector<std::string> validate_config(const ExperimentConfig& config);

struct Verdict {
  std::string name;
  double value = 0.0;
  std::string relation;  // "<=" or ">="
  double threshold = 0.0;
  bool pass = false;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct Report {
  std::string experiment;
  ExperimentConfig config;
  Table paths;
  Table summary;
  std::vector<Verdict> verdicts;
  double wall_seconds = 0.0;

  bool passed() const;
  // Value of a summary row by run and quantity; NaN when absent.
  double summary_value(const std::string& run, const std::string& quantity) const;
};

// Throws UnknownExperiment for an unknown name and ConfigError when the
// configuration fails validation.
Report run_experiment(const std::string& name, const ExperimentConfig& config);

std::string table_csv(const Table& table);
nlohmann::json report_json(const Report& report);

// Writes paths.csv, summary.csv and report.json to
// <root>/<experiment>/<UTC timestamp>[-n] and returns that directory.
std::filesystem::path write_report(const Report& report, const std::filesystem::path& root);

}  // namespace pocketlab
