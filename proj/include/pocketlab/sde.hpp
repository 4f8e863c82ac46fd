#pragma once

// Euler-Maruyama simulation of X^{x,eps}, the diffusion with generator
//
//   M + eps^-1 L = 1/2 Laplacian + (1/(2 eps)) div(a grad).
//
// Expanding the divergence, eps^-1 L u = (a/(2 eps)) Laplacian u + (1/(2 eps)) grad a . grad u,
// so the generator is 1/2 (1 + a/eps) Laplacian + (grad a / (2 eps)) . grad. The
// matching Ito equation has isotropic diffusion sqrt(1 + a/eps) and drift
// grad a / (2 eps):
//
//   dX = grad a(X) / (2 eps) dt + sqrt(1 + a(X)/eps) dW.
//
// On U both coefficients are trivial and X is a standard Brownian motion.
//
// PathEngine does not step this equation directly. Near a pocket it moves the
// radial coordinate in the chart w = int dr / sqrt(sigma) (stretched
// logarithmically outside the pocket) and rotates the angle, with a step size
// that keeps the variance in w fixed. A Metropolis-Hastings test on the radial
// marginal makes the time-weighted occupation of the chain exactly Lebesgue
// measure. Away from the pockets the walk is plain Brownian motion.
//
// The pocket relaxes on the time scale R^2 eps / A, so a stepped path pays
// O(1/eps) steps per unit of time spent inside. When a path reaches a pocket
// boundary the engine instead draws a whole passage to distance
// passage_height from a PassageLaw (see passage.hpp). Passages are skipped
// while occupation times or excursions are tracked.

#include <array>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pocketlab/diffusivity.hpp"
#include "pocketlab/geometry.hpp"
#include "pocketlab/random.hpp"

namespace pocketlab {

struct SdeConfig {
  double eps = 1e-4;
  // Largest time step.
  double dt0 = 1e-3;
  // Length bounds of adaptive_dt. eta_diff is also the shortest step length
  // the path engine takes on U near a surface.
  double eta_drift = 1e-4;
  double eta_diff = 1e-4;
  // Step length as a fraction of the local length scale: the distance to the
  // nearest tracked surface on U, the layer width near a pocket.
  double step_fraction = 0.125;
  // Height h of the exact pocket passage: a path reaching a pocket boundary
  // jumps to the sphere at distance h outside, with time and place drawn from
  // the passage law. 0 turns passages off. A pocket whose passage ball would
  // meet a stop surface, another pocket or F is stepped instead.
  double passage_height = 0.005;
  double t_max = 50.0;
  std::uint64_t seed = 1;
  int workers = 1;

  // Throws ConfigError on a non-positive parameter.
  void validate() const;
};

// A level set {x : sd(x) = offset} where sd is the signed distance to pocket
// `pocket`, or to the target F when pocket == -1.
struct Surface {
  int pocket = -1;
  double offset = 0.0;
};

enum class TargetKind { PocketBoundary, OuterShell, InnerShell, TargetBoundary, TargetClosure };

struct Target {
  TargetKind kind = TargetKind::PocketBoundary;
  int pocket = 0;
  double delta = 0.0;

  static Target pocket_boundary(int k) { return {TargetKind::PocketBoundary, k, 0.0}; }
  static Target outer_shell(int k, double delta) { return {TargetKind::OuterShell, k, delta}; }
  static Target inner_shell(int k, double delta) { return {TargetKind::InnerShell, k, delta}; }
  static Target target_boundary() { return {TargetKind::TargetBoundary, -1, 0.0}; }
  static Target target_closure() { return {TargetKind::TargetClosure, -1, 0.0}; }

  // Throws ConfigError if the target does not exist in `geometry`.
  Surface surface(const Geometry& geometry) const;
};

enum class PathStatus { Hit, Timeout };

struct TrajectoryOutcome {
  double tau = 0.0;
  Point exit{};
  PathStatus status = PathStatus::Hit;
  // Completed arrivals at a pocket boundary, each after leaving the
  // excursion shell (the count N of the excursion decomposition).
  int excursions = 0;
  // Time spent per RegionKind, summed over pockets.
  std::array<double, kRegionKindCount> occupation{};
  int hit_surface = -1;
  std::uint64_t steps = 0;
  std::uint64_t rejections = 0;
  std::uint64_t passages = 0;
};

struct PathOptions {
  std::vector<Surface> stop;
  double horizon = std::numeric_limits<double>::infinity();
  // When positive, count excursions boundary -> shell edge -> boundary with
  // this shell width.
  double excursion_delta = 0.0;
  // When positive, accumulate occupation times with classify(., region_delta).
  double region_delta = 0.0;
  // Stop at once when the start lies in the closed target F.
  bool stop_in_target = false;
};

namespace detail {
struct PocketChart;
}

// Path integrator shared by the fast-diffusion simulator and the Brownian
// segments of the limit walk (field == nullptr means a = 0 everywhere).
// Holds references; the geometry and field must outlive the engine.
class PathEngine {
 public:
  PathEngine(const Geometry& geometry, const DiffusivityField* field, const SdeConfig& config);

  TrajectoryOutcome run(const Point& x0, const PathOptions& options, RandomStream& rng) const;

  const Geometry& geometry() const { return geometry_; }
  const SdeConfig& config() const { return config_; }

 private:
  const Geometry& geometry_;
  const DiffusivityField* field_;
  SdeConfig config_;
  std::shared_ptr<const std::vector<detail::PocketChart>> charts_;
  std::vector<int> chart_of_;  // per pocket, -1 without a chart
};

// One Euler-Maruyama step with a caller-supplied standard normal vector xi.
Point sde_step(const DiffusivityField& field, const Point& x, double dt, const Point& xi, double eps);

// Step-size rule of the plain explicit scheme: dt0 on U, and inside a pocket
// dt = min(dt0, eta_drift * 2 eps / |grad a|, eta_diff^2 / (1 + a/eps)).
double adaptive_dt(const DiffusivityField& field, const Point& x, const SdeConfig& config);

TrajectoryOutcome run_to_target(const DiffusivityField& field, const Point& x0, const Target& target,
                                const SdeConfig& config, RandomStream& rng);

// Runs `n_paths` independent paths; path i uses stream_key(config.seed, i).
// The result is ordered by path index and independent of config.workers.
std::vector<TrajectoryOutcome> simulate_paths(const PathEngine& engine, const Point& x0,
                                              const PathOptions& options, int n_paths);

struct ExitTimeEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int hits = 0;
  int timeouts = 0;
};

// Mean and standard error of tau over the paths that hit. Throws
// TimeoutDominated when more than 1% of the paths time out.
ExitTimeEstimate summarize_exit_times(std::span<const TrajectoryOutcome> outcomes);

ExitTimeEstimate mc_exit_time(const DiffusivityField& field, const Point& x0, const Target& target,
                              const SdeConfig& config, int n_paths);

struct EmpiricalBoundaryMeasure {
  int pocket = 0;
  std::vector<double> mass;  // per bin of the boundary parameter, sums to 1
  int samples = 0;
};

double total_variation(std::span<const double> p, std::span<const double> q);
// Distance of a histogram to the normalised surface measure of its pocket.
double total_variation_to_uniform(const Geometry& geometry, const EmpiricalBoundaryMeasure& m);
// Bin masses of the normalised surface measure (uniform in 2D; two atoms in 1D).
std::vector<double> uniform_boundary_masses(const Geometry& geometry, int bins);

EmpiricalBoundaryMeasure histogram_exit_points(const Geometry& geometry, int k,
                                               std::span<const TrajectoryOutcome> outcomes, int bins);

// Distribution of theta(X) at the exit from D^{+delta}_k, started at x0 on the
// boundary of D_k.
EmpiricalBoundaryMeasure mc_exit_distribution(const DiffusivityField& field, const Point& x0, int k,
                                              double delta, const SdeConfig& config, int n_paths, int bins);

struct VanishingRow {
  double eps = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double ratio = 0.0;  // mean / sqrt(eps)
};

// Mean exit time from the pocket containing x0 for each eps (listed in
// decreasing order).
std::vector<VanishingRow> mc_vanishing_exit(const DiffusivityField& field, const Point& x0,
                                            std::span<const double> eps_list, const SdeConfig& config,
                                            int n_paths);

struct OccupationEstimate {
  std::array<double, kRegionKindCount> fraction{};
  std::array<double, kRegionKindCount> std_error{};
  int paths = 0;
};

// Per-path occupation fractions over [0, T], averaged over paths.
OccupationEstimate summarize_occupation(const Geometry& geometry, const Point& x0, double delta,
                                        std::span<const TrajectoryOutcome> outcomes);

OccupationEstimate mc_occupation(const DiffusivityField& field, const Point& x0, double T, double delta,
                                 const SdeConfig& config, int n_paths);

}  // namespace pocketlab
