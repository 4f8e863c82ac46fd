#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "pocketlab/errors.hpp"
#include "pocketlab/lab.hpp"

namespace pocketlab {

using nlohmann::json;

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"exit-vanishing",   "shell-exit",      "redistribution",
                                                 "hitting-compare",  "resolvent-check", "barrier-check",
                                                 "skeleton-consistency"};
  return names;
}

namespace {

ExperimentConfig disk_base(const std::string& name) {
  ExperimentConfig c;
  c.experiment = name;
  c.dimension = 2;
  c.pockets = {Pocket::disk(0.5, 0.5, 0.15)};
  c.amplitudes = {1.0};
  return c;
}

ExperimentConfig interval_base(const std::string& name) {
  ExperimentConfig c;
  c.experiment = name;
  c.dimension = 1;
  c.pockets = {Pocket::interval(0.0, 0.2)};
  c.target = Pocket::interval(0.55, 0.1);
  c.amplitudes = {1.0};
  return c;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) fail(path + "." + it.key(), "unknown key");
}

double get_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

int get_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  auto i = v.get<long long>();
  if (i < -2147483647LL || i > 2147483647LL) fail(path, "integer out of range");
  return static_cast<int>(i);
}

std::uint64_t get_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  fail(path, "expected a nonnegative integer");
}

std::vector<double> get_numbers(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<int> get_ints(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of integers");
  std::vector<int> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_int(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Pocket get_ball(const json& v, int dim, const std::string& path) {
  if (dim == 1) {
    check_keys(v, path, {"left", "length"});
    if (!v.contains("left") || !v.contains("length")) fail(path, "an interval needs left and length");
    return Pocket::interval(get_number(v["left"], path + ".left"), get_number(v["length"], path + ".length"));
  }
  check_keys(v, path, {"center", "radius"});
  if (!v.contains("center") || !v.contains("radius")) fail(path, "a disk needs center and radius");
  auto c = get_numbers(v["center"], path + ".center");
  if (c.size() != 2) fail(path + ".center", "expected two coordinates");
  return Pocket::disk(c[0], c[1], get_number(v["radius"], path + ".radius"));
}

json ball_json(const Pocket& p) {
  if (p.dim == 1) return {{"left", p.left()}, {"length", p.length()}};
  return {{"center", {p.center[0], p.center[1]}}, {"radius", p.radius}};
}

// Torus distance between ball centres.
double centre_distance(const Pocket& a, const Pocket& b) { return torus_distance(a.center, b.center); }

}  // namespace

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  if (experiment == "shell-exit") {
    c = disk_base(experiment);
    c.eps = {1e-4};
    c.delta = {0.02};
    c.paths = 10000;
  } else if (experiment == "exit-vanishing") {
    c = disk_base(experiment);
    c.eps = {1e-2, 1e-3, 1e-4};
    c.paths = 4000;
  } else if (experiment == "redistribution") {
    c = disk_base(experiment);
    c.eps = {1e-5};
    c.delta = {0.02};
    c.paths = 10000;
  } else if (experiment == "hitting-compare") {
    c = interval_base(experiment);
    c.eps = {1e-4};
    c.paths = 20000;
    c.grid = {1000, 2000};
  } else if (experiment == "resolvent-check") {
    c = disk_base(experiment);
    c.pockets = {Pocket::disk(0.3, 0.3, 0.1), Pocket::disk(0.7, 0.65, 0.12)};
    c.amplitudes = {1.0, 1.0};
    c.grid = {128};
    c.lambda = 1.0;
  } else if (experiment == "barrier-check") {
    c = disk_base(experiment);
    c.eps = {1e-3, 1e-4};
    c.delta = {0.02};
  } else if (experiment == "skeleton-consistency") {
    c = interval_base(experiment);
    c.eps = {1e-5};
    c.delta = {0.01, 0.005};
    c.paths = 20000;
    c.grid = {1000};
  } else {
    throw UnknownExperiment("unknown experiment '" + experiment + "'");
  }
  return c;
}

ExperimentConfig parse_config(const json& doc, const std::string& experiment) {
  check_keys(doc, "config",
             {"experiment", "output_dir", "geometry", "amplitudes", "eps", "delta", "paths", "seed", "workers", "grid",
              "starts", "bins", "lambda", "psi_samples", "shell_samples", "holding_scale", "sticky_weight", "sde"});
  std::string name = experiment;
  if (doc.contains("experiment")) {
    if (!doc["experiment"].is_string()) fail("config.experiment", "expected a string");
    std::string named = doc["experiment"].get<std::string>();
    if (!name.empty() && named != name)
      fail("config.experiment", "names '" + named + "' but '" + name + "' was requested");
    name = named;
  }
  ExperimentConfig c = default_config(name);

  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) fail("config.output_dir", "expected a string");
    c.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("geometry")) {
    const json& g = doc["geometry"];
    check_keys(g, "config.geometry", {"dimension", "pockets", "target"});
    if (!g.contains("dimension") || !g.contains("pockets"))
      fail("config.geometry", "dimension and pockets are required");
    c.dimension = get_int(g["dimension"], "config.geometry.dimension");
    if (c.dimension != 1 && c.dimension != 2) fail("config.geometry.dimension", "must be 1 or 2");
    if (!g["pockets"].is_array()) fail("config.geometry.pockets", "expected an array");
    c.pockets.clear();
    for (std::size_t i = 0; i < g["pockets"].size(); ++i)
      c.pockets.push_back(get_ball(g["pockets"][i], c.dimension, "config.geometry.pockets[" + std::to_string(i) + "]"));
    c.target.reset();
    if (g.contains("target") && !g["target"].is_null())
      c.target = get_ball(g["target"], c.dimension, "config.geometry.target");
    if (!doc.contains("amplitudes")) c.amplitudes.assign(c.pockets.size(), 1.0);
  }
  if (doc.contains("amplitudes")) c.amplitudes = get_numbers(doc["amplitudes"], "config.amplitudes");
  if (doc.contains("eps")) c.eps = get_numbers(doc["eps"], "config.eps");
  if (doc.contains("delta")) c.delta = get_numbers(doc["delta"], "config.delta");
  if (doc.contains("paths")) c.paths = get_int(doc["paths"], "config.paths");
  if (doc.contains("seed")) c.seed = get_u64(doc["seed"], "config.seed");
  if (doc.contains("workers")) c.workers = get_int(doc["workers"], "config.workers");
  if (doc.contains("grid")) c.grid = get_ints(doc["grid"], "config.grid");
  if (doc.contains("starts")) {
    const json& s = doc["starts"];
    if (!s.is_array()) fail("config.starts", "expected an array");
    c.starts.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::string p = "config.starts[" + std::to_string(i) + "]";
      if (s[i].is_number()) {
        c.starts.push_back({get_number(s[i], p), 0.0});
      } else {
        auto v = get_numbers(s[i], p);
        if (v.size() != static_cast<std::size_t>(c.dimension)) fail(p, "wrong number of coordinates");
        c.starts.push_back({v[0], c.dimension == 2 ? v[1] : 0.0});
      }
    }
  }
  if (doc.contains("bins")) c.bins = get_int(doc["bins"], "config.bins");
  if (doc.contains("lambda")) c.lambda = get_number(doc["lambda"], "config.lambda");
  if (doc.contains("psi_samples")) c.psi_samples = get_int(doc["psi_samples"], "config.psi_samples");
  if (doc.contains("shell_samples")) c.shell_samples = get_int(doc["shell_samples"], "config.shell_samples");
  if (doc.contains("holding_scale")) c.holding_scale = get_number(doc["holding_scale"], "config.holding_scale");
  if (doc.contains("sticky_weight")) c.sticky_weight = get_number(doc["sticky_weight"], "config.sticky_weight");
  if (doc.contains("sde")) {
    const json& s = doc["sde"];
    check_keys(s, "config.sde", {"dt0", "eta_drift", "eta_diff", "step_fraction", "passage_height", "t_max"});
    if (s.contains("dt0")) c.sde.dt0 = get_number(s["dt0"], "config.sde.dt0");
    if (s.contains("eta_drift")) c.sde.eta_drift = get_number(s["eta_drift"], "config.sde.eta_drift");
    if (s.contains("eta_diff")) c.sde.eta_diff = get_number(s["eta_diff"], "config.sde.eta_diff");
    if (s.contains("step_fraction")) c.sde.step_fraction = get_number(s["step_fraction"], "config.sde.step_fraction");
    if (s.contains("passage_height"))
      c.sde.passage_height = get_number(s["passage_height"], "config.sde.passage_height");
    if (s.contains("t_max")) c.sde.t_max = get_number(s["t_max"], "config.sde.t_max");
  }
  return c;
}

json to_json(const ExperimentConfig& c) {
  json pockets = json::array();
  for (const auto& p : c.pockets) pockets.push_back(ball_json(p));
  json starts = json::array();
  for (const auto& s : c.starts) {
    if (c.dimension == 1) starts.push_back(s[0]);
    else starts.push_back({s[0], s[1]});
  }
  return {
      {"experiment", c.experiment},
      {"output_dir", c.output_dir},
      {"geometry",
       {{"dimension", c.dimension}, {"pockets", pockets}, {"target", c.target ? ball_json(*c.target) : json()}}},
      {"amplitudes", c.amplitudes},
      {"eps", c.eps},
      {"delta", c.delta},
      {"paths", c.paths},
      {"seed", c.seed},
      {"workers", c.workers},
      {"grid", c.grid},
      {"starts", starts},
      {"bins", c.bins},
      {"lambda", c.lambda},
      {"psi_samples", c.psi_samples},
      {"shell_samples", c.shell_samples},
      {"holding_scale", c.holding_scale},
      {"sticky_weight", c.sticky_weight},
      {"sde",
       {{"dt0", c.sde.dt0},
        {"eta_drift", c.sde.eta_drift},
        {"eta_diff", c.sde.eta_diff},
        {"step_fraction", c.sde.step_fraction},
        {"passage_height", c.sde.passage_height},
        {"t_max", c.sde.t_max}}},
  };
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> v;
  auto add = [&](const std::string& s) { v.push_back(s); };
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), c.experiment) == names.end())
    add("experiment: unknown experiment '" + c.experiment + "'");
  if (c.dimension != 1 && c.dimension != 2) add("geometry.dimension: must be 1 or 2");
  if (c.pockets.empty()) add("geometry.pockets: at least one pocket is required");

  bool shapes_ok = true;
  auto check_ball = [&](const Pocket& p, const std::string& what) {
    if (p.dim != c.dimension) {
      add(what + ": shape does not match the dimension");
      shapes_ok = false;
    }
    if (!(p.radius > 0.0) || !std::isfinite(p.radius)) {
      add(what + ": size must be positive");
      shapes_ok = false;
    } else if (p.radius >= 0.5) {
      add(what + ": does not fit on the unit torus");
      shapes_ok = false;
    }
  };
  for (std::size_t i = 0; i < c.pockets.size(); ++i) check_ball(c.pockets[i], "geometry.pockets[" + std::to_string(i) + "]");
  if (c.target) check_ball(*c.target, "geometry.target");

  double min_gap = std::numeric_limits<double>::infinity();
  double min_radius = std::numeric_limits<double>::infinity();
  if (shapes_ok) {
    for (std::size_t i = 0; i < c.pockets.size(); ++i) {
      min_radius = std::min(min_radius, c.pockets[i].radius);
      for (std::size_t j = i + 1; j < c.pockets.size(); ++j) {
        double gap = centre_distance(c.pockets[i], c.pockets[j]) - c.pockets[i].radius - c.pockets[j].radius;
        min_gap = std::min(min_gap, gap);
        if (!(gap > 0.0))
          add("geometry.pockets: pockets " + std::to_string(i) + "," + std::to_string(j) + " closures intersect");
      }
      if (c.target) {
        double gap = centre_distance(c.pockets[i], *c.target) - c.pockets[i].radius - c.target->radius;
        min_gap = std::min(min_gap, gap);
        if (!(gap > 0.0)) add("geometry.target: target and pocket " + std::to_string(i) + " closures intersect");
      }
    }
    if (c.dimension == 1) {
      double covered = 0.0;
      for (const auto& p : c.pockets) covered += p.length();
      if (c.target) covered += c.target->length();
      if (!(covered < 1.0)) add("geometry: pockets and target cover the torus");
    }
  }

  if (c.amplitudes.size() != c.pockets.size()) add("amplitudes: need one amplitude per pocket");
  for (double a : c.amplitudes)
    if (!(a > 0.0) || !std::isfinite(a)) add("amplitudes: every amplitude must be positive");
  for (double e : c.eps)
    if (!(e > 0.0) || !std::isfinite(e)) add("eps: every eps must be positive");
  if (shapes_ok && !c.pockets.empty()) {
    double bound = std::min(0.5 * min_gap, 0.5 * min_radius);
    for (double d : c.delta) {
      if (!(d > 0.0)) add("delta: every delta must be positive");
      else if (!(d < bound)) add("delta: delta too large (must be below " + std::to_string(bound) + ")");
    }
  }
  if (c.paths < 0) add("paths: must be nonnegative");
  if (c.workers < 1) add("workers: must be at least 1");
  if (c.bins < 1) add("bins: must be at least 1");
  for (int n : c.grid)
    if (n < 8) add("grid: at least 8 nodes per axis");
  for (std::size_t i = 0; i < c.starts.size(); ++i) {
    const Point& s = c.starts[i];
    if (!std::isfinite(s[0]) || !std::isfinite(s[1])) add("starts[" + std::to_string(i) + "]: not finite");
  }
  if (!(c.lambda > 0.0)) add("lambda: must be positive");
  if (c.psi_samples < 1) add("psi_samples: must be at least 1");
  if (c.shell_samples < 1) add("shell_samples: must be at least 1");
  if (!(c.holding_scale >= 0.0)) add("holding_scale: must be nonnegative");
  if (!(c.sticky_weight > 0.0)) add("sticky_weight: must be positive");
  if (!(c.sde.dt0 > 0.0)) add("sde.dt0: must be positive");
  if (!(c.sde.eta_drift > 0.0)) add("sde.eta_drift: must be positive");
  if (!(c.sde.eta_diff > 0.0)) add("sde.eta_diff: must be positive");
  if (!(c.sde.step_fraction > 0.0 && c.sde.step_fraction < 1.0)) add("sde.step_fraction: must lie in (0, 1)");
  if (!(c.sde.passage_height >= 0.0)) add("sde.passage_height: must be non-negative");
  if (!(c.sde.t_max > 0.0)) add("sde.t_max: must be positive");

  // Requirements of the individual experiments.
  const std::string& e = c.experiment;
  bool needs_paths = e == "shell-exit" || e == "exit-vanishing" || e == "redistribution" || e == "skeleton-consistency";
  if (needs_paths && c.paths < 100) add("paths: at least 100 paths are required");
  if (e == "hitting-compare" && c.paths != 0 && c.paths < 100) add("paths: 0 (solver only) or at least 100");
  bool needs_eps = e != "resolvent-check" && e != "skeleton-consistency";
  if (needs_eps && c.eps.empty()) add("eps: at least one value is required");
  if (e == "skeleton-consistency" && c.dimension == 2 && c.eps.empty())
    add("eps: the two-dimensional comparison needs an eps");
  if ((e == "shell-exit" || e == "redistribution" || e == "barrier-check" || e == "skeleton-consistency") &&
      c.delta.empty())
    add("delta: at least one value is required");
  if (e == "exit-vanishing") {
    if (c.eps.size() < 2) add("eps: at least two values are required");
    for (std::size_t i = 1; i < c.eps.size(); ++i)
      if (!(c.eps[i] < c.eps[i - 1])) add("eps: values must be strictly decreasing");
  }
  if ((e == "hitting-compare" || e == "skeleton-consistency") && !c.target)
    add("geometry.target: this experiment needs a target region");
  if ((e == "hitting-compare" || e == "resolvent-check" || e == "skeleton-consistency") && c.grid.empty() &&
      c.dimension == 2)
    add("grid: at least one grid size is required");
  if (e == "resolvent-check" && c.grid.empty()) add("grid: at least one grid size is required");
  if (e == "redistribution" && c.starts.size() == 1) add("starts: two start points are required");
  return v;
}

}  // namespace pocketlab
