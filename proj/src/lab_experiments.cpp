#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>

#include "pocketlab/csv.hpp"
#include "pocketlab/diffusivity.hpp"
#include "pocketlab/elliptic.hpp"
#include "pocketlab/errors.hpp"
#include "pocketlab/lab.hpp"
#include "pocketlab/limit_walk.hpp"
#include "pocketlab/random.hpp"

namespace pocketlab {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) { return format_double(v); }

std::string label(std::initializer_list<std::pair<const char*, std::string>> parts) {
  std::string s;
  for (const auto& [k, v] : parts) {
    if (!s.empty()) s += ';';
    s += k;
    s += '=';
    s += v;
  }
  return s;
}

class Builder {
 public:
  explicit Builder(Report& r, int dim) : r_(r), dim_(dim) {
    r_.summary.header = {"run", "quantity", "value", "std_error", "reference"};
    r_.paths.header = {"run", "path_id", "tau", "exit_x"};
    if (dim_ == 2) r_.paths.header.push_back("exit_y");
    for (const char* h : {"status", "N", "occ_deep_u", "occ_shell", "occ_boundary", "occ_pocket", "occ_inner",
                          "occ_target"})
      r_.paths.header.push_back(h);
  }

  void summary(const std::string& run, const std::string& quantity, double value, double se = kNaN,
               double reference = kNaN) {
    r_.summary.rows.push_back({run, quantity, num(value), num(se), num(reference)});
  }

  void verdict(const std::string& name, double value, const std::string& relation, double threshold) {
    bool pass = relation == "<=" ? value <= threshold : value >= threshold;
    r_.verdicts.push_back({name, value, relation, threshold, pass});
  }

  void path_rows(const std::string& run, const std::vector<TrajectoryOutcome>& outcomes, bool occupation) {
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      std::vector<std::string> row = {run, std::to_string(i), num(o.tau), num(o.exit[0])};
      if (dim_ == 2) row.push_back(num(o.exit[1]));
      row.push_back(o.status == PathStatus::Hit ? "hit" : "timeout");
      row.push_back(std::to_string(o.excursions));
      for (double v : o.occupation) row.push_back(occupation ? num(v) : "");
      r_.paths.rows.push_back(std::move(row));
    }
  }

  void skeleton_rows(const std::string& run, const std::vector<SkeletonPath>& paths) {
    for (std::size_t i = 0; i < paths.size(); ++i) {
      const auto& p = paths[i];
      std::vector<std::string> row = {run, std::to_string(i), num(p.end_time), num(p.exit[0])};
      if (dim_ == 2) row.push_back(num(p.exit[1]));
      row.push_back(p.hit_target ? "hit" : "timeout");
      row.push_back(std::to_string(p.visits));
      // Only the time at collapsed points is tracked; it is reported as pocket time.
      for (int k = 0; k < kRegionKindCount; ++k)
        row.push_back(k == static_cast<int>(RegionKind::Pocket) ? num(p.collapsed_time) : "");
      r_.paths.rows.push_back(std::move(row));
    }
  }

 private:
  Report& r_;
  int dim_;
};

Geometry make_geometry(const ExperimentConfig& c) { return Geometry(c.dimension, c.pockets, c.target); }

SdeConfig sde_config(const ExperimentConfig& c, double eps) {
  SdeConfig s = c.sde;
  s.eps = eps;
  s.seed = c.seed;
  s.workers = c.workers;
  return s;
}

Point radial_point(const Pocket& p, double r, double angle) {
  if (p.dim == 1) return wrap_point(p.center + Point{angle < std::numbers::pi / 2 ? r : -r, 0.0});
  return wrap_point(p.center + Point{r * std::cos(angle), r * std::sin(angle)});
}

ExitTimeEstimate estimate(const std::vector<TrajectoryOutcome>& outcomes) { return summarize_exit_times(outcomes); }

void shell_exit(const ExperimentConfig& c, Builder& b) {
  Geometry geo = make_geometry(c);
  DiffusivityField field(geo, c.amplitudes);
  const Pocket& p = geo.pocket(0);
  std::vector<Point> starts = c.starts;
  if (starts.empty()) starts = {geo.boundary_sample(0, 0.0)};
  for (double eps : c.eps) {
    PathEngine engine(geo, &field, sde_config(c, eps));
    for (double delta : c.delta) {
      double formula = delta * p.volume() / p.boundary_measure();
      PathOptions opts;
      opts.stop = {{0, delta}};
      opts.horizon = c.sde.t_max;
      for (std::size_t i = 0; i < starts.size(); ++i) {
        std::string run = label({{"eps", num(eps)}, {"delta", num(delta)}, {"start", std::to_string(i)}});
        auto out = simulate_paths(engine, starts[i], opts, c.paths);
        b.path_rows(run, out, false);
        auto est = estimate(out);
        double ratio = est.mean / formula;
        b.summary(run, "mean_tau", est.mean, est.std_error, formula);
        b.summary(run, "ratio", ratio, est.std_error / formula, 1.0);
        b.verdict("shell_exit_ratio_error[" + run + "]", std::abs(ratio - 1.0), "<=", 0.15);
      }
      // Second statement: the exit time from the shell stays of order delta
      // for every start inside D^{+delta}.
      const double radii[4] = {0.0, 0.5 * p.radius, p.radius - 0.5 * delta, p.radius + 0.5 * delta};
      double sup = 0.0;
      for (int j = 0; j < 4; ++j) {
        Point x = radial_point(p, radii[j], j * std::numbers::pi / 2.0);
        std::string run = label({{"eps", num(eps)}, {"delta", num(delta)}, {"inner", std::to_string(j)}});
        auto out = simulate_paths(engine, x, opts, c.paths);
        b.path_rows(run, out, false);
        auto est = estimate(out);
        b.summary(run, "mean_tau", est.mean, est.std_error, 3.0 * formula);
        sup = std::max(sup, est.mean);
      }
      std::string run = label({{"eps", num(eps)}, {"delta", num(delta)}});
      b.summary(run, "sup_mean_tau", sup, kNaN, 3.0 * formula);
      b.verdict("shell_exit_sup[" + run + "]", sup, "<=", 3.0 * formula);
    }
  }
}

void exit_vanishing(const ExperimentConfig& c, Builder& b) {
  Geometry geo = make_geometry(c);
  DiffusivityField field(geo, c.amplitudes);
  Point x0 = c.starts.empty() ? geo.pocket(0).center : c.starts[0];
  int k = geo.nearest_pocket(x0).pocket;
  if (!geo.nearest_pocket(x0).inside) throw ConfigError("starts[0]: must lie inside a pocket");
  std::vector<ExitTimeEstimate> est;
  for (double eps : c.eps) {
    PathEngine engine(geo, &field, sde_config(c, eps));
    PathOptions opts;
    opts.stop = {{k, 0.0}};
    opts.horizon = c.sde.t_max;
    std::string run = label({{"eps", num(eps)}});
    auto out = simulate_paths(engine, x0, opts, c.paths);
    b.path_rows(run, out, false);
    est.push_back(estimate(out));
    b.summary(run, "mean_tau", est.back().mean, est.back().std_error);
    b.summary(run, "mean_over_sqrt_eps", est.back().mean / std::sqrt(eps), est.back().std_error / std::sqrt(eps));
  }
  for (std::size_t i = 0; i + 1 < est.size(); ++i) {
    double z = (est[i].mean - est[i + 1].mean) /
               std::sqrt(est[i].std_error * est[i].std_error + est[i + 1].std_error * est[i + 1].std_error);
    std::string run = label({{"eps", num(c.eps[i])}, {"next", num(c.eps[i + 1])}});
    b.summary(run, "decrease_z", z);
    b.verdict("strict_decrease[" + run + "]", z, ">=", 3.0);
  }
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    double r = est[i].mean / std::sqrt(c.eps[i]);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  b.summary("all", "ratio_max_over_min", hi / lo);
  b.verdict("sqrt_eps_ratio_spread", hi / lo, "<=", 4.0);
}

void redistribution(const ExperimentConfig& c, Builder& b) {
  Geometry geo = make_geometry(c);
  DiffusivityField field(geo, c.amplitudes);
  std::vector<Point> starts = c.starts;
  if (starts.empty()) starts = {geo.boundary_sample(0, 0.0), geo.boundary_sample(0, c.dimension == 1 ? 0.75 : 0.25)};
  const double eps = c.eps[0], delta = c.delta[0];
  PathEngine engine(geo, &field, sde_config(c, eps));
  PathOptions opts;
  opts.stop = {{0, delta}};
  opts.horizon = c.sde.t_max;
  std::vector<double> uniform = uniform_boundary_masses(geo, c.bins);
  std::vector<EmpiricalBoundaryMeasure> hist;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    std::string run = label({{"eps", num(eps)}, {"delta", num(delta)}, {"start", std::to_string(i)}});
    auto out = simulate_paths(engine, starts[i], opts, c.paths);
    b.path_rows(run, out, false);
    auto est = estimate(out);
    hist.push_back(histogram_exit_points(geo, 0, out, c.bins));
    b.summary(run, "mean_tau", est.mean, est.std_error);
    for (int j = 0; j < c.bins; ++j) {
      auto ju = static_cast<std::size_t>(j);
      double m = hist.back().mass[ju];
      b.summary(run, "bin_" + std::to_string(j), m, std::sqrt(m * (1.0 - m) / hist.back().samples), uniform[ju]);
    }
    double tv = total_variation(hist.back().mass, uniform);
    b.summary(run, "tv_to_uniform", tv);
    b.verdict("tv_to_uniform[" + run + "]", tv, "<=", 0.08);
  }
  for (std::size_t i = 0; i + 1 < hist.size(); ++i) {
    double tv = total_variation(hist[i].mass, hist[i + 1].mass);
    std::string run = label({{"start", std::to_string(i)}, {"other", std::to_string(i + 1)}});
    b.summary(run, "tv_between_starts", tv);
    b.verdict("tv_between_starts[" + run + "]", tv, "<=", 0.08);
  }
}

// Finite-difference solutions of the hitting problem on every configured
// grid, finest last.
struct HittingSolutions {
  std::vector<std::unique_ptr<Grid>> grids;
  std::vector<EllipticSolution> solutions;
};

HittingSolutions solve_on_grids(const Geometry& geo, const ExperimentConfig& c, Builder& b, bool verdicts) {
  HittingSolutions hs;
  EllipticOptions opt;
  opt.sticky_weight = c.sticky_weight;
  std::optional<ClosedForm1D> exact;
  if (geo.dimension() == 1) exact = closed_form_1d(geo, c.sticky_weight);
  for (int n : c.grid) {
    hs.grids.push_back(std::make_unique<Grid>(geo, n));
    const Grid& grid = *hs.grids.back();
    hs.solutions.push_back(solve_hitting_problem(grid, opt));
    const EllipticSolution& sol = hs.solutions.back();
    std::string run = label({{"grid", std::to_string(n)}});
    double flux_res = 0.0;
    for (double r : sol.flux_residual) flux_res = std::max(flux_res, std::abs(r));
    for (std::size_t k = 0; k < sol.c.size(); ++k)
      b.summary(run, "c_" + std::to_string(k), sol.c[k], kNaN, exact ? exact->c[k] : kNaN);
    b.summary(run, "flux_residual", flux_res);
    b.summary(run, "interior_residual", sol.interior_residual);
    if (verdicts) b.verdict("flux_residual[" + run + "]", flux_res, "<=", 1e-8);
    if (exact) {
      double c_err = 0.0;
      for (std::size_t k = 0; k < sol.c.size(); ++k) c_err = std::max(c_err, std::abs(sol.c[k] - exact->c[k]));
      double u_err = 0.0;
      for (int i = 0; i < grid.node_count(); ++i) {
        double u = sol.u[static_cast<std::size_t>(i)];
        if (std::isnan(u)) continue;
        u_err = std::max(u_err, std::abs(u - exact->evaluate(grid.node(i)[0])));
      }
      b.summary(run, "c_error", c_err);
      b.summary(run, "u_max_error", u_err);
      if (verdicts) {
        b.verdict("c_error[" + run + "]", c_err, "<=", 1e-3);
        b.verdict("u_max_error[" + run + "]", u_err, "<=", 1e-3);
      }
    }
  }
  return hs;
}

double pde_value(const Geometry& geo, const ExperimentConfig& c, const HittingSolutions& hs, const Point& x) {
  if (geo.dimension() == 1) return closed_form_1d(geo, c.sticky_weight).evaluate(x[0]);
  return evaluate(*hs.grids.back(), hs.solutions.back(), x);
}

std::vector<Point> default_hitting_starts(const Geometry& geo) {
  const Pocket& p = geo.pocket(0);
  if (geo.dimension() == 1) return {p.center};
  return {wrap_point(p.center + Point{0.5, 0.5}), wrap_point(p.center + Point{p.radius + 0.02, 0.0}), p.center};
}

void hitting_compare(const ExperimentConfig& c, Builder& b) {
  Geometry geo = make_geometry(c);
  DiffusivityField field(geo, c.amplitudes);
  HittingSolutions hs = solve_on_grids(geo, c, b, true);
  if (geo.dimension() == 1) {
    auto exact = closed_form_1d(geo, c.sticky_weight);
    for (std::size_t k = 0; k < exact.c.size(); ++k) b.summary("closed_form", "c_" + std::to_string(k), exact.c[k]);
  }
  if (c.paths == 0) return;
  std::vector<Point> starts = c.starts.empty() ? default_hitting_starts(geo) : c.starts;
  const double tol = geo.dimension() == 1 ? 0.05 : 0.07;
  for (double eps : c.eps) {
    PathEngine engine(geo, &field, sde_config(c, eps));
    PathOptions opts;
    opts.stop = {{-1, 0.0}};
    opts.stop_in_target = true;
    opts.horizon = c.sde.t_max;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      std::string run = label({{"eps", num(eps)}, {"start", std::to_string(i)}});
      double ref = pde_value(geo, c, hs, starts[i]);
      auto out = simulate_paths(engine, starts[i], opts, c.paths);
      b.path_rows(run, out, false);
      auto est = estimate(out);
      double rel = std::abs(est.mean - ref) / ref;
      b.summary(run, "mean_tau", est.mean, est.std_error, ref);
      b.summary(run, "relative_error", rel);
      b.verdict("mc_vs_pde[" + run + "]", rel, "<=", tol);
    }
  }
}

void resolvent_check(const ExperimentConfig& c, Builder& b) {
  Geometry geo = make_geometry(c);
  const int np = geo.pocket_count();
  const double lambda = c.lambda;
  for (int n : c.grid) {
    Grid grid(geo, n, false);
    std::string grun = label({{"grid", std::to_string(n)}});
    double worst_flux = 0.0;
    auto flux_of = [&](const EllipticSolution& sol) {
      for (double r : sol.flux_residual) worst_flux = std::max(worst_flux, std::abs(r));
    };

    // Constant right-hand side.
    const double kappa = 0.7;
    std::vector<double> at_pocket(static_cast<std::size_t>(np), kappa);
    auto sol = solve_resolvent(grid, lambda, [&](const Point&) { return kappa; }, at_pocket);
    flux_of(sol);
    double err = 0.0;
    for (double u : sol.u) err = std::max(err, std::abs(u - kappa / lambda));
    for (double ck : sol.c) err = std::max(err, std::abs(ck - kappa / lambda));
    for (double gk : sol.g) err = std::max(err, std::abs(gk));
    b.summary(grun, "constant_psi_error", err, kNaN, 0.0);
    b.verdict("constant_psi_error[" + grun + "]", err, "<=", 1e-10);

    // Random nonnegative right-hand sides, constant on each pocket boundary
    // so that they are continuous on the quotient space.
    double min_f = std::numeric_limits<double>::infinity();
    const double reach = 0.05;
    for (int j = 0; j < c.psi_samples; ++j) {
      RandomStream rng(stream_key(c.seed, static_cast<std::uint64_t>(j)));
      double base = j % 2 == 0 ? 0.0 : rng.uniform();
      std::vector<double> bump(static_cast<std::size_t>(np));
      for (double& v : bump) v = 2.0 * rng.uniform();
      struct Mode {
        double amp;
        int kx, ky;
        double phase;
      };
      std::vector<Mode> modes(3);
      for (auto& m : modes) {
        m.amp = rng.uniform();
        m.kx = static_cast<int>(rng.uniform() * 7.0) - 3;
        m.ky = static_cast<int>(rng.uniform() * 7.0) - 3;
        m.phase = 2.0 * std::numbers::pi * rng.uniform();
      }
      auto psi = [&](const Point& x) {
        double wave = 0.0;
        for (const auto& m : modes)
          wave += m.amp * (1.0 + std::cos(2.0 * std::numbers::pi * (m.kx * x[0] + m.ky * x[1]) + m.phase));
        double v = base;
        for (int k = 0; k < np; ++k) {
          double s = std::clamp(geo.signed_distance(k, x) / reach, 0.0, 1.0);
          wave *= s;
          v += bump[static_cast<std::size_t>(k)] * (1.0 - s);
        }
        return v + wave;
      };
      std::vector<double> psi_d(static_cast<std::size_t>(np));
      for (int k = 0; k < np; ++k) psi_d[static_cast<std::size_t>(k)] = base + bump[static_cast<std::size_t>(k)];
      auto s = solve_resolvent(grid, lambda, psi, psi_d);
      flux_of(s);
      for (double u : s.u) min_f = std::min(min_f, u);
      for (double ck : s.c) min_f = std::min(min_f, ck);
      b.summary(label({{"grid", std::to_string(n)}, {"psi", std::to_string(j)}}), "min_f",
                *std::min_element(s.u.begin(), s.u.end()));
    }
    b.summary(grun, "min_f", min_f, kNaN, 0.0);
    b.verdict("min_f[" + grun + "]", min_f, ">=", -1e-10);
    b.summary(grun, "flux_residual", worst_flux);
    b.verdict("flux_residual[" + grun + "]", worst_flux, "<=", 1e-8);
  }
}

void barrier_check(const ExperimentConfig& c, Builder& b) {
  Geometry geo = make_geometry(c);
  DiffusivityField field(geo, c.amplitudes);
  for (int k = 0; k < geo.pocket_count(); ++k) {
    double psi = field.profile(k);
    for (double eps : c.eps) {
      for (double delta : c.delta) {
        std::string run = label({{"pocket", std::to_string(k)}, {"eps", num(eps)}, {"delta", num(delta)}});
        auto rep = verify_supersolution(field, k, delta, eps, c.shell_samples);
        BarrierParams bp{delta, eps, psi, psi};
        double slope = std::abs(barrier_w_prime(delta, bp));
        b.summary(run, "max_operator", rep.max_operator, kNaN, -0.5);
        b.summary(run, "max_a1", rep.max_a1, kNaN, -2.0);
        b.summary(run, "max_abs_a2", rep.max_abs_a2);
        b.summary(run, "max_abs_a3", rep.max_abs_a3);
        b.summary(run, "sup_u", rep.sup_u);
        b.summary(run, "sup_u_over_sqrt_eps", rep.sup_u / std::sqrt(eps));
        b.summary(run, "w_prime_at_delta", slope, kNaN, 0.0);
        b.verdict("max_operator[" + run + "]", rep.max_operator, "<=", -0.5);
        b.verdict("w_prime_at_delta[" + run + "]", slope, "<=", 1e-12);
      }
    }
  }
}

void skeleton_consistency(const ExperimentConfig& c, Builder& b) {
  Geometry geo = make_geometry(c);
  Point x0 = c.starts.empty() ? geo.pocket(0).center : c.starts[0];
  QuotientPoint q0 = quotient_map(geo, x0);
  SkeletonConfig sk;
  sk.steps = sde_config(c, c.eps.empty() ? 1e-4 : c.eps[0]);
  sk.holding_scale = c.holding_scale;

  double ref = kNaN;
  std::string ref_name;
  double tol = 0.0;
  if (geo.dimension() == 1) {
    ref = closed_form_1d(geo, c.sticky_weight).evaluate(x0[0]);
    b.summary("closed_form", "u_at_start", ref);
    ref_name = "pde";
    tol = 0.07;
  } else {
    DiffusivityField field(geo, c.amplitudes);
    double eps = c.eps[0];
    PathEngine engine(geo, &field, sde_config(c, eps));
    PathOptions opts;
    opts.stop = {{-1, 0.0}};
    opts.stop_in_target = true;
    opts.horizon = c.sde.t_max;
    std::string run = label({{"sde_eps", num(eps)}});
    auto out = simulate_paths(engine, x0, opts, c.paths);
    b.path_rows(run, out, false);
    auto est = estimate(out);
    ref = est.mean;
    b.summary(run, "mean_tau", est.mean, est.std_error);
    if (!c.grid.empty()) {
      HittingSolutions hs = solve_on_grids(geo, c, b, false);
      b.summary(run, "pde_u_at_start", pde_value(geo, c, hs, x0));
    }
    ref_name = "sde";
    tol = 0.10;
  }
  for (double delta : c.delta) {
    std::string run = label({{"delta", num(delta)}});
    auto paths = skeleton_hits(geo, q0, delta, sk, c.paths);
    b.skeleton_rows(run, paths);
    std::vector<TrajectoryOutcome> outs(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
      outs[i].tau = paths[i].end_time;
      outs[i].status = paths[i].hit_target ? PathStatus::Hit : PathStatus::Timeout;
    }
    auto est = estimate(outs);
    double rel = std::abs(est.mean - ref) / ref;
    b.summary(run, "mean_tau", est.mean, est.std_error, ref);
    b.summary(run, "relative_error", rel);
    b.verdict("skeleton_vs_" + ref_name + "[" + run + "]", rel, "<=", tol);
  }
}

}  // namespace

bool Report::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

double Report::summary_value(const std::string& run, const std::string& quantity) const {
  for (const auto& row : summary.rows)
    if (row[0] == run && row[1] == quantity) return std::stod(row[2]);
  return kNaN;
}

Report run_experiment(const std::string& name, const ExperimentConfig& config) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw UnknownExperiment("unknown experiment '" + name + "'");
  ExperimentConfig c = config;
  c.experiment = name;
  auto violations = validate_config(c);
  if (!violations.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ConfigError(msg);
  }

  Report r;
  r.experiment = name;
  r.config = c;
  Builder b(r, c.dimension);
  auto t0 = std::chrono::steady_clock::now();
  if (name == "shell-exit") shell_exit(c, b);
  else if (name == "exit-vanishing") exit_vanishing(c, b);
  else if (name == "redistribution") redistribution(c, b);
  else if (name == "hitting-compare") hitting_compare(c, b);
  else if (name == "resolvent-check") resolvent_check(c, b);
  else if (name == "barrier-check") barrier_check(c, b);
  else skeleton_consistency(c, b);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string table_csv(const Table& table) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row(table.header);
  for (const auto& row : table.rows) w.row(row);
  return os.str();
}

json report_json(const Report& report) {
  json verdicts = json::array();
  for (const auto& v : report.verdicts)
    verdicts.push_back({{"name", v.name},
                        {"value", v.value},
                        {"relation", v.relation},
                        {"threshold", v.threshold},
                        {"verdict", v.pass ? "PASS" : "FAIL"}});
  return {{"experiment", report.experiment},
          {"config", to_json(report.config)},
          {"verdicts", verdicts},
          {"passed", report.passed()},
          {"wall_seconds", report.wall_seconds},
          {"files", {"paths.csv", "summary.csv"}}};
}

std::filesystem::path write_report(const Report& report, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  fs::path base = root / report.experiment;
  fs::create_directories(base);
  fs::path dir = base / stamp;
  for (int n = 1; !fs::create_directory(dir); ++n) dir = base / (std::string(stamp) + "-" + std::to_string(n));
  auto write = [&](const char* file, const std::string& text) {
    std::ofstream f(dir / file, std::ios::binary);
    f << text;
    if (!f) throw std::runtime_error("cannot write " + (dir / file).string());
  };
  write("paths.csv", table_csv(report.paths));
  write("summary.csv", table_csv(report.summary));
  write("report.json", report_json(report).dump(2) + "\n");
  return dir;
}

}  // namespace pocketlab
