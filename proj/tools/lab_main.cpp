// lab <experiment> [--config <file>] [--out <dir>] [--seed <u64>] [--paths <n>] [--workers <n>]
//
// Exit codes: 0 when every verdict passes, 1 when any fails, 2 for usage or
// configuration errors.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "pocketlab/errors.hpp"
#include "pocketlab/lab.hpp"

int main(int argc, char** argv) {
  using namespace pocketlab;

  CLI::App app{"Experiment runner for the pocket diffusion laboratory"};
  std::string experiment;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<int> workers;
  bool list = false;
  app.add_option("experiment", experiment, "Experiment name");
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "Output root directory");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--paths", paths, "Monte-Carlo paths per run");
  app.add_option("--workers", workers, "Worker threads");
  app.add_flag("--list", list, "List the experiments and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list) {
    for (const auto& n : experiment_names()) std::cout << n << "\n";
    return 0;
  }
  if (experiment.empty()) {
    std::cerr << "error: an experiment name is required (see --list)\n";
    return 2;
  }

  try {
    ExperimentConfig config;
    if (config_path.empty()) {
      config = default_config(experiment);
    } else {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open " + config_path);
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      config = parse_config(doc, experiment);
    }
    if (out_dir) config.output_dir = *out_dir;
    if (seed) config.seed = *seed;
    if (paths) config.paths = *paths;
    if (workers) config.workers = *workers;

    auto violations = validate_config(config);
    if (!violations.empty()) {
      for (const auto& v : violations) std::cerr << "config: " << v << "\n";
      return 2;
    }

    Report report = run_experiment(experiment, config);
    auto dir = write_report(report, config.output_dir);
    for (const auto& v : report.verdicts)
      std::printf("%s  %s = %.6g %s %.6g\n", v.pass ? "PASS" : "FAIL", v.name.c_str(), v.value, v.relation.c_str(),
                  v.threshold);
    std::printf("report: %s (%.1f s)\n", dir.string().c_str(), report.wall_seconds);
    return report.passed() ? 0 : 1;
  } catch (const TimeoutDominated& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UnknownExperiment& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
