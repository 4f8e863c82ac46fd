// Acceptance runner: acceptance [--criterion N] [--workers W] [--out DIR]
//
// Prints one PASS/FAIL line per criterion, preceded by the individual
// verdicts. Lines starting with "info" are diagnostics and never affect the
// outcome. Exit code 0 iff every selected criterion passes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pocketlab/csv.hpp"
#include "pocketlab/elliptic.hpp"
#include "pocketlab/lab.hpp"
#include "pocketlab/limit_walk.hpp"

using namespace pocketlab;

namespace {

std::filesystem::path g_out = "acceptance_out";
int g_workers = 1;

bool report(const Report& r) {
  auto dir = write_report(r, g_out);
  for (const auto& v : r.verdicts)
    std::printf("  %s  %s = %.6g %s %.6g\n", v.pass ? "pass" : "fail", v.name.c_str(), v.value, v.relation.c_str(),
                v.threshold);
  std::printf("  report %s (%.1f s)\n", dir.string().c_str(), r.wall_seconds);
  std::fflush(stdout);
  return r.passed();
}

Report run(const std::string& name, ExperimentConfig c) {
  c.workers = g_workers;
  c.output_dir = g_out.string();
  std::printf("  running %s\n", name.c_str());
  std::fflush(stdout);
  return run_experiment(name, c);
}

double summary_mean(const Report& r, const std::string& run) { return r.summary_value(run, "mean_tau"); }

// Two-dimensional configuration shared by the probabilistic comparisons: one
// disk pocket and a small disk target.
ExperimentConfig disk_with_target(const std::string& experiment) {
  ExperimentConfig c = default_config(experiment);
  c.dimension = 2;
  c.pockets = {Pocket::disk(0.5, 0.5, 0.15)};
  c.target = Pocket::disk(0.2, 0.2, 0.05);
  c.amplitudes = {1.0};
  c.grid = {200, 400};
  return c;
}

bool criterion1() {
  Report r = run("shell-exit", default_config("shell-exit"));
  bool ok = report(r);
  const auto& c = r.config;
  const Pocket& p = c.pockets[0];
  double formula = c.delta[0] * p.volume() / p.boundary_measure();
  std::string start = "eps=" + format_double(c.eps[0]) + ";delta=" + format_double(c.delta[0]) + ";start=0";
  double mean = summary_mean(r, start);
  // Pocket as a point of mass 2 Vol: u(R) for (1/2) Laplacian u = -1 on the
  // shell with u = 0 outside and -u'(R) nu = 2 Vol.
  const double d = c.delta[0];
  double sticky2 = p.dim == 1 ? p.length() * d + d * d : p.radius * d + d * d / 2.0;
  std::printf("  info  mean / (delta Vol / nu) = %.4f, mean / (2 delta Vol / nu) = %.4f\n", mean / formula,
              mean / (2 * formula));
  std::printf("  info  mean %.6g against the sticky-weight-2 shell value %.6g: ratio %.4f\n", mean, sticky2,
              mean / sticky2);
  return ok;
}

bool criterion2() { return report(run("exit-vanishing", default_config("exit-vanishing"))); }

bool criterion3() { return report(run("redistribution", default_config("redistribution"))); }

bool criterion4() {
  ExperimentConfig c = default_config("hitting-compare");
  c.paths = 0;
  c.grid = {1000, 2000};
  return report(run("hitting-compare", c));
}

bool criterion5() {
  ExperimentConfig one = default_config("hitting-compare");
  Report r1 = run("hitting-compare", one);
  bool ok = report(r1);
  {
    Geometry geo(1, one.pockets, one.target);
    double mc = summary_mean(r1, "eps=" + format_double(one.eps[0]) + ";start=0");
    double w2 = closed_form_1d(geo, 2.0).evaluate(one.pockets[0].center[0]);
    std::printf("  info  1D mean %.5f against the sticky-weight-2 value %.5f: relative %.4f\n", mc, w2,
                std::abs(mc - w2) / w2);
  }

  ExperimentConfig two = disk_with_target("hitting-compare");
  two.eps = {1e-4};
  two.paths = 4000;
  two.starts = {{0.85, 0.85}, {0.67, 0.5}, {0.5, 0.5}};
  Report r2 = run("hitting-compare", two);
  ok = report(r2) && ok;
  {
    Geometry geo(2, two.pockets, two.target);
    Grid grid(geo, two.grid.back());
    EllipticOptions opt;
    opt.sticky_weight = 2.0;
    auto sol = solve_hitting_problem(grid, opt);
    for (std::size_t i = 0; i < two.starts.size(); ++i) {
      double mc = summary_mean(r2, "eps=" + format_double(two.eps[0]) + ";start=" + std::to_string(i));
      double w2 = evaluate(grid, sol, two.starts[i]);
      std::printf("  info  2D start %zu mean %.5f against the sticky-weight-2 value %.5f: relative %.4f\n", i, mc, w2,
                  std::abs(mc - w2) / w2);
    }
  }
  return ok;
}

bool criterion6() {
  ExperimentConfig one = default_config("skeleton-consistency");
  bool ok = report(run("skeleton-consistency", one));

  ExperimentConfig two = disk_with_target("skeleton-consistency");
  two.eps = {1e-5};
  two.delta = {0.01, 0.005};
  two.paths = 4000;
  two.starts = {{0.5, 0.5}};
  two.grid = {400};
  Report r2 = run("skeleton-consistency", two);
  ok = report(r2) && ok;

  // The same comparison with twice the holding time per visit.
  double sde = summary_mean(r2, "sde_eps=" + format_double(two.eps[0]));
  Geometry geo(2, two.pockets, two.target);
  SkeletonConfig sk;
  sk.steps = two.sde;
  sk.steps.seed = two.seed;
  sk.steps.workers = g_workers;
  sk.holding_scale = 2.0;
  for (double delta : two.delta) {
    auto est = hitting_time_F(geo, QuotientPoint::collapsed(0), delta, sk, two.paths);
    std::printf("  info  holding scale 2, delta %.3g: skeleton %.5f against sde %.5f: relative %.4f\n", delta,
                est.mean, sde, std::abs(est.mean - sde) / sde);
  }
  return ok;
}

bool criterion7() { return report(run("resolvent-check", default_config("resolvent-check"))); }

bool criterion8() { return report(run("barrier-check", default_config("barrier-check"))); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool criterion9() {
  struct Case {
    std::string name;
    ExperimentConfig config;
  };
  std::vector<Case> cases;
  {
    ExperimentConfig c = default_config("redistribution");
    c.eps = {1e-4};
    c.paths = 1000;
    cases.push_back({"redistribution", c});
  }
  {
    ExperimentConfig c = default_config("hitting-compare");
    c.paths = 300;
    cases.push_back({"hitting-compare", c});
  }
  {
    ExperimentConfig c = default_config("skeleton-consistency");
    c.paths = 1000;
    cases.push_back({"skeleton-consistency", c});
  }
  bool ok = true;
  for (auto& cs : cases) {
    std::string reference;
    for (int w : {1, 4, 8, 1, 4, 8}) {
      cs.config.workers = w;
      cs.config.output_dir = g_out.string();
      Report r = run_experiment(cs.name, cs.config);
      auto dir = write_report(r, g_out);
      std::string bytes = slurp(dir / "paths.csv");
      if (reference.empty()) reference = bytes;
      bool same = bytes == reference;
      ok = ok && same && !bytes.empty();
      std::printf("  %s  %s workers=%d paths.csv %zu bytes %s\n", same ? "pass" : "fail", cs.name.c_str(), w,
                  bytes.size(), same ? "identical" : "differs");
      std::fflush(stdout);
    }
  }
  return ok;
}

struct Criterion {
  const char* title;
  std::function<bool()> body;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"shell exit time", criterion1},
      {"vanishing exit time", criterion2},
      {"redistribution on the shell", criterion3},
      {"one-dimensional boundary problem", criterion4},
      {"probabilistic representation", criterion5},
      {"skeleton consistency", criterion6},
      {"resolvent and maximum principle", criterion7},
      {"barrier diagnostic", criterion8},
      {"determinism across worker counts", criterion9},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  std::string out = g_out.string();
  app.add_option("--criterion", only, "Run only criterion N (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--workers", g_workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "Report directory");
  CLI11_PARSE(app, argc, argv);
  g_out = out;

  bool all = true;
  for (int i = 1; i <= static_cast<int>(criteria().size()); ++i) {
    if (only != 0 && i != only) continue;
    const auto& c = criteria()[static_cast<std::size_t>(i - 1)];
    std::printf("criterion %d: %s\n", i, c.title);
    std::fflush(stdout);
    bool pass = false;
    try {
      pass = c.body();
    } catch (const std::exception& e) {
      std::printf("  error: %s\n", e.what());
    }
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", i, c.title);
    std::fflush(stdout);
    all = all && pass;
  }
  return all ? 0 : 1;
}
