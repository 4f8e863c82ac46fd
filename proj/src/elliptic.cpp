#include "pocketlab/elliptic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "pocketlab/errors.hpp"

namespace pocketlab {

namespace {

constexpr double kMinTheta = 1e-6;
constexpr double kSolveTol = 1e-10;

int wrap_index(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

// Smallest t in (0, 1] with |d + t v| = R, or 1 when the segment stays outside.
double crossing_fraction(const Point& d, const Point& v, double R) {
  double A = dot(v, v);
  double B = 2.0 * dot(d, v);
  double C = dot(d, d) - R * R;
  double disc = B * B - 4.0 * A * C;
  if (disc < 0.0) return 1.0;
  double sq = std::sqrt(disc);
  double t1 = (-B - sq) / (2.0 * A);
  double t2 = (-B + sq) / (2.0 * A);
  for (double t : {t1, t2})
    if (t > 0.0 && t <= 1.0) return t;
  return 1.0;
}

double quad_weight(int offset, double t) {
  switch (offset) {
    case -1: return 0.5 * t * (t - 1.0);
    case 0: return 1.0 - t * t;
    default: return 0.5 * t * (t + 1.0);
  }
}

// Visits the row of the discrete operator at interior node idx: calls
// diag(coefficient), node(neighbour, coefficient) and cut(arm, coefficient).
// Off-diagonal coefficients enter with their sign in the operator.
template <class Diag, class Node, class Cut>
void visit_row(const Grid& grid, int idx, double lambda, Diag&& diag, Node&& node, Cut&& cut) {
  const double h2 = grid.spacing() * grid.spacing();
  auto arms = grid.arms(idx);
  double d = lambda;
  for (int axis = 0; axis < grid.dimension(); ++axis) {
    const Grid::Arm& minus = arms[static_cast<std::size_t>(2 * axis)];
    const Grid::Arm& plus = arms[static_cast<std::size_t>(2 * axis + 1)];
    double tm = minus.theta, tp = plus.theta;
    d += 1.0 / (h2 * tp * tm);
    double cp = -1.0 / (h2 * tp * (tp + tm));
    double cm = -1.0 / (h2 * tm * (tp + tm));
    if (plus.neighbor >= 0) node(plus.neighbor, cp); else cut(plus, cp);
    if (minus.neighbor >= 0) node(minus.neighbor, cm); else cut(minus, cm);
  }
  diag(d);
}

}  // namespace

Grid::Grid(const Geometry& geometry, int n, bool with_target)
    : geometry_(geometry), n_(n), with_target_(with_target && geometry.target().has_value()) {
  if (n < 8) throw ConfigError("grid needs at least 8 nodes per axis");
  h_ = 1.0 / n;
  const int dim = geometry_.dimension();
  const std::size_t count = dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
  const double tol = 1e-3 * h_;
  kind_.assign(count, NodeKind::Interior);
  region_.assign(count, kNoBoundary);

  for (std::size_t idx = 0; idx < count; ++idx) {
    Point x = node(static_cast<int>(idx));
    for (int k = 0; k < geometry_.pocket_count(); ++k) {
      if (geometry_.signed_distance(k, x) <= tol) {
        kind_[idx] = NodeKind::Pocket;
        region_[idx] = k;
      }
    }
    if (kind_[idx] == NodeKind::Interior && with_target_ && geometry_.target_signed_distance(x) <= tol) {
      kind_[idx] = NodeKind::Target;
      region_[idx] = kTargetRegion;
    }
    if (kind_[idx] == NodeKind::Interior) ++interior_count_;
  }

  arms_.assign(count * static_cast<std::size_t>(2 * dim), Arm{});
  for (std::size_t idx = 0; idx < count; ++idx) {
    if (kind_[idx] != NodeKind::Interior) continue;
    int i = static_cast<int>(idx) % n;
    int j = static_cast<int>(idx) / n;
    Point x = node(static_cast<int>(idx));
    for (int axis = 0; axis < dim; ++axis) {
      for (int side = 0; side < 2; ++side) {
        int s = side == 0 ? -1 : 1;
        int nb = axis == 0 ? index(i + s, j) : index(i, j + s);
        Arm& arm = arms_[idx * static_cast<std::size_t>(2 * dim) + static_cast<std::size_t>(2 * axis + side)];
        if (kind_[static_cast<std::size_t>(nb)] == NodeKind::Interior) {
          arm.neighbor = nb;
          continue;
        }
        int r = region_[static_cast<std::size_t>(nb)];
        const Pocket& ball = r == kTargetRegion ? *geometry_.target() : geometry_.pocket(r);
        Point v{};
        v[static_cast<std::size_t>(axis)] = s * h_;
        double t = crossing_fraction(torus_displacement(ball.center, x), v, ball.radius);
        arm.theta = std::max(t, kMinTheta);
        arm.boundary = r;
        arm.point = wrap_point(x + arm.theta * v);
      }
    }
  }
}

int Grid::index(int i, int j) const {
  if (dimension() == 1) return wrap_index(i, n_);
  return wrap_index(i, n_) + n_ * wrap_index(j, n_);
}

Point Grid::node(int idx) const {
  if (dimension() == 1) return {idx * h_, 0.0};
  return {(idx % n_) * h_, (idx / n_) * h_};
}

std::span<const Grid::Arm> Grid::arms(int idx) const {
  auto per = static_cast<std::size_t>(2 * dimension());
  return {arms_.data() + static_cast<std::size_t>(idx) * per, per};
}

BoundaryData constant_boundary(std::vector<double> pocket_values, double target_value) {
  return [values = std::move(pocket_values), target_value](const Point&, int region) {
    return region == Grid::kTargetRegion ? target_value : values.at(static_cast<std::size_t>(region));
  };
}

GridField sample_field(const Grid& grid, const std::function<double(const Point&)>& f) {
  GridField out(static_cast<std::size_t>(grid.node_count()));
  for (int i = 0; i < grid.node_count(); ++i) out[static_cast<std::size_t>(i)] = f(grid.node(i));
  return out;
}

struct DirichletSolver::Impl {
  std::vector<int> unknown;  // node -> unknown index or -1
  std::vector<int> nodes;    // unknown -> node
  Eigen::SparseMatrix<double> A;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

DirichletSolver::DirichletSolver(const Grid& grid, double lambda)
    : grid_(grid), lambda_(lambda), impl_(std::make_unique<Impl>()) {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
  const int N = grid.node_count();
  impl_->unknown.assign(static_cast<std::size_t>(N), -1);
  for (int i = 0; i < N; ++i) {
    if (grid.kind(i) != Grid::NodeKind::Interior) continue;
    impl_->unknown[static_cast<std::size_t>(i)] = static_cast<int>(impl_->nodes.size());
    impl_->nodes.push_back(i);
  }
  const int M = static_cast<int>(impl_->nodes.size());
  if (M == 0) throw SingularSystem("grid has no interior nodes");

  bool any_cut = false;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(M) * static_cast<std::size_t>(2 * grid.dimension() + 1));
  for (int row = 0; row < M; ++row) {
    int idx = impl_->nodes[static_cast<std::size_t>(row)];
    visit_row(
        grid, idx, lambda, [&](double d) { trip.emplace_back(row, row, d); },
        [&](int nb, double c) { trip.emplace_back(row, impl_->unknown[static_cast<std::size_t>(nb)], c); },
        [&](const Grid::Arm&, double) { any_cut = true; });
  }
  if (lambda == 0.0 && !any_cut) throw SingularSystem("lambda = 0 with no Dirichlet boundary");

  impl_->A.resize(M, M);
  impl_->A.setFromTriplets(trip.begin(), trip.end());
  impl_->A.makeCompressed();
  impl_->lu.compute(impl_->A);
  if (impl_->lu.info() != Eigen::Success) throw SingularSystem("sparse factorisation failed");
}

DirichletSolver::~DirichletSolver() = default;

GridField DirichletSolver::solve(const GridField& rhs, const BoundaryData& boundary) const {
  const Grid& grid = grid_;
  if (static_cast<int>(rhs.size()) != grid.node_count()) throw DomainError("rhs size does not match the grid");
  const int M = static_cast<int>(impl_->nodes.size());
  Eigen::VectorXd b(M);
  for (int row = 0; row < M; ++row) {
    int idx = impl_->nodes[static_cast<std::size_t>(row)];
    double v = rhs[static_cast<std::size_t>(idx)];
    visit_row(
        grid, idx, lambda_, [](double) {}, [](int, double) {},
        [&](const Grid::Arm& arm, double c) { v -= c * boundary(arm.point, arm.boundary); });
    b[row] = v;
  }
  Eigen::VectorXd x = impl_->lu.solve(b);
  double bnorm = b.norm();
  auto rel = [&](const Eigen::VectorXd& r) { return bnorm > 0.0 ? r.norm() / bnorm : r.norm(); };
  Eigen::VectorXd r = b - impl_->A * x;
  last_residual_ = rel(r);
  for (int it = 0; it < 3 && last_residual_ > kSolveTol; ++it) {
    x += impl_->lu.solve(r);
    r = b - impl_->A * x;
    last_residual_ = rel(r);
  }
  if (last_residual_ > kSolveTol) throw SingularSystem("linear solve did not reach the residual tolerance");

  GridField u(rhs.size());
  for (int i = 0; i < grid.node_count(); ++i) {
    int k = impl_->unknown[static_cast<std::size_t>(i)];
    u[static_cast<std::size_t>(i)] = k >= 0 ? x[k] : boundary(grid.node(i), grid.region(i));
  }
  return u;
}

GridField solve_dirichlet(const Grid& grid, const GridField& rhs, const BoundaryData& boundary, double lambda) {
  DirichletSolver solver(grid, lambda);
  return solver.solve(rhs, boundary);
}

double discrete_residual(const Grid& grid, const GridField& u, const GridField& rhs, const BoundaryData& boundary,
                         double lambda) {
  double worst = 0.0, scale = 0.0;
  for (int i = 0; i < grid.node_count(); ++i) {
    if (grid.kind(i) != Grid::NodeKind::Interior) continue;
    double f = rhs[static_cast<std::size_t>(i)];
    double au = 0.0, mag = std::abs(f);
    auto add = [&](double term) {
      au += term;
      mag += std::abs(term);
    };
    visit_row(
        grid, i, lambda, [&](double d) { add(d * u[static_cast<std::size_t>(i)]); },
        [&](int nb, double c) { add(c * u[static_cast<std::size_t>(nb)]); },
        [&](const Grid::Arm& arm, double c) { add(c * boundary(arm.point, arm.boundary)); });
    worst = std::max(worst, std::abs(au - f));
    scale = std::max(scale, mag);
  }
  return scale > 0.0 ? worst / scale : worst;
}

double interpolate(const Grid& grid, const GridField& u, const Point& x) {
  const double h = grid.spacing();
  const int dim = grid.dimension();
  Point p = wrap_point(x);
  int i0 = static_cast<int>(std::lround(p[0] / h));
  int j0 = dim == 2 ? static_cast<int>(std::lround(p[1] / h)) : 0;
  double ti = p[0] / h - i0;
  double tj = dim == 2 ? p[1] / h - j0 : 0.0;
  if (std::abs(ti) < 1e-12 && std::abs(tj) < 1e-12) return u[static_cast<std::size_t>(grid.index(i0, j0))];

  double sum = 0.0;
  for (int dj = (dim == 2 ? -1 : 0); dj <= (dim == 2 ? 1 : 0); ++dj) {
    double wj = dim == 2 ? quad_weight(dj, tj) : 1.0;
    for (int di = -1; di <= 1; ++di) {
      int idx = grid.index(i0 + di, j0 + dj);
      if (grid.kind(idx) != Grid::NodeKind::Interior)
        throw InsufficientStencil("interpolation stencil reaches an excluded node");
      sum += wj * quad_weight(di, ti) * u[static_cast<std::size_t>(idx)];
    }
  }
  return sum;
}

double flux_integral(const Grid& grid, const GridField& u, int k, const BoundaryData& boundary,
                     int quadrature_points) {
  const Pocket& pk = grid.geometry().pocket(k);
  const double h = grid.spacing();
  const int n = grid.per_axis();

  if (grid.dimension() == 1) {
    double total = 0.0;
    for (int side : {1, -1}) {
      double p = pk.center[0] + side * pk.radius;
      int i1 = side > 0 ? static_cast<int>(std::floor(p / h)) + 1 : static_cast<int>(std::ceil(p / h)) - 1;
      if (grid.kind(wrap_index(i1, n)) != Grid::NodeKind::Interior) i1 += side;
      int i2 = i1 + side;
      for (int i : {i1, i2})
        if (grid.kind(wrap_index(i, n)) != Grid::NodeKind::Interior)
          throw InsufficientStencil("flux stencil reaches an excluded node");
      double s1 = std::abs(i1 * h - p);
      double s2 = s1 + h;
      double f0 = boundary({wrap_unit(p), 0.0}, k);
      double f1 = u[static_cast<std::size_t>(wrap_index(i1, n))];
      double f2 = u[static_cast<std::size_t>(wrap_index(i2, n))];
      double du = -f0 * (s1 + s2) / (s1 * s2) + f1 * s2 / (s1 * (s2 - s1)) - f2 * s1 / (s2 * (s2 - s1));
      // du is the derivative away from the pocket; n points the other way.
      total -= du;
    }
    return total;
  }

  if (quadrature_points < 8) throw DomainError("need at least 8 quadrature points");
  const double s = 2.5 * h;
  const double weight = 2.0 * std::numbers::pi * pk.radius / quadrature_points;
  double total = 0.0;
  for (int q = 0; q < quadrature_points; ++q) {
    double phi = 2.0 * std::numbers::pi * q / quadrature_points;
    Point m{std::cos(phi), std::sin(phi)};
    Point p = pk.center + pk.radius * m;
    double f0 = boundary(wrap_point(p), k);
    double f1 = interpolate(grid, u, p + s * m);
    double f2 = interpolate(grid, u, p + (2.0 * s) * m);
    double du = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * s);
    total -= du * weight;
  }
  return total;
}

double evaluate(const Grid& grid, const EllipticSolution& sol, const Point& x) {
  const Geometry& geo = grid.geometry();
  for (int k = 0; k < geo.pocket_count(); ++k)
    if (geo.signed_distance(k, x) <= 0.0) return sol.c.at(static_cast<std::size_t>(k));
  if (grid.uses_target() && geo.in_target(x)) throw DomainError("solution is not defined inside F");
  return interpolate(grid, sol.u, x);
}

namespace {

struct Lifts {
  std::vector<GridField> h;
  std::vector<BoundaryData> bc;
};

Lifts compute_lifts(const Grid& grid, const DirichletSolver& solver) {
  const int n = grid.geometry().pocket_count();
  Lifts out;
  GridField zero(static_cast<std::size_t>(grid.node_count()), 0.0);
  for (int k = 0; k < n; ++k) {
    std::vector<double> vals(static_cast<std::size_t>(n), 0.0);
    vals[static_cast<std::size_t>(k)] = 1.0;
    out.bc.push_back(constant_boundary(vals, 0.0));
    out.h.push_back(solver.solve(zero, out.bc.back()));
  }
  return out;
}

Eigen::VectorXd solve_coupling(const Eigen::MatrixXd& M, const Eigen::VectorXd& r, double& condition) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv[0] : 0.0;
  double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
  if (!(smin > 1e-13 * smax) || !(smax > 0.0)) throw SingularCouplingMatrix("coupling matrix is singular");
  condition = smax / smin;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  return lu.solve(r);
}

}  // namespace

EllipticSolution solve_hitting_problem(const Grid& grid, const EllipticOptions& options) {
  const Geometry& geo = grid.geometry();
  if (!grid.uses_target()) throw ConfigError("the hitting problem needs a target region");
  const int n = geo.pocket_count();
  const auto N = static_cast<std::size_t>(grid.node_count());
  const double w = options.sticky_weight;

  DirichletSolver solver(grid, 0.0);
  const GridField ones(N, 1.0);
  const BoundaryData zero_bc = constant_boundary(std::vector<double>(static_cast<std::size_t>(n), 0.0), 0.0);
  GridField base = solver.solve(ones, zero_bc);
  Lifts lifts = compute_lifts(grid, solver);

  EllipticSolution sol;
  sol.coupling.resize(n, n);
  Eigen::VectorXd r(n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k)
      sol.coupling(j, k) = flux_integral(grid, lifts.h[static_cast<std::size_t>(k)], j,
                                         lifts.bc[static_cast<std::size_t>(k)], options.flux_points);
    r[j] = w * geo.pocket(j).volume() - flux_integral(grid, base, j, zero_bc, options.flux_points);
  }
  Eigen::VectorXd c = solve_coupling(sol.coupling, r, sol.coupling_condition);
  sol.c.assign(c.data(), c.data() + n);

  sol.u = base;
  for (std::size_t i = 0; i < N; ++i) {
    auto idx = static_cast<int>(i);
    switch (grid.kind(idx)) {
      case Grid::NodeKind::Interior:
        for (int k = 0; k < n; ++k) sol.u[i] += c[k] * lifts.h[static_cast<std::size_t>(k)][i];
        break;
      case Grid::NodeKind::Pocket: sol.u[i] = c[grid.region(idx)]; break;
      case Grid::NodeKind::Target: sol.u[i] = std::numeric_limits<double>::quiet_NaN(); break;
    }
  }

  BoundaryData bc = constant_boundary(sol.c, 0.0);
  for (int j = 0; j < n; ++j) {
    double f = flux_integral(grid, sol.u, j, bc, options.flux_points);
    sol.flux.push_back(f);
    sol.flux_residual.push_back(f - w * geo.pocket(j).volume());
  }
  sol.interior_residual = discrete_residual(grid, sol.u, ones, bc, 0.0);
  return sol;
}

EllipticSolution solve_resolvent(const Grid& grid, double lambda, const std::function<double(const Point&)>& psi,
                                 std::span<const double> psi_at_pocket, const EllipticOptions& options) {
  const Geometry& geo = grid.geometry();
  if (!(lambda > 0.0)) throw DomainError("the resolvent needs lambda > 0");
  if (grid.uses_target()) throw ConfigError("the resolvent grid must be built without the target region");
  const int n = geo.pocket_count();
  if (static_cast<int>(psi_at_pocket.size()) != n) throw ConfigError("one psi value per pocket is required");
  const double w = options.sticky_weight;

  DirichletSolver solver(grid, lambda);
  const GridField rhs = sample_field(grid, psi);
  const BoundaryData zero_bc = constant_boundary(std::vector<double>(static_cast<std::size_t>(n), 0.0), 0.0);
  GridField base = solver.solve(rhs, zero_bc);
  Lifts lifts = compute_lifts(grid, solver);

  EllipticSolution sol;
  sol.lambda = lambda;
  sol.coupling.resize(n, n);
  Eigen::VectorXd r(n);
  for (int j = 0; j < n; ++j) {
    double vol = geo.pocket(j).volume();
    for (int k = 0; k < n; ++k)
      sol.coupling(j, k) = flux_integral(grid, lifts.h[static_cast<std::size_t>(k)], j,
                                         lifts.bc[static_cast<std::size_t>(k)], options.flux_points);
    sol.coupling(j, j) += w * lambda * vol;
    r[j] = w * psi_at_pocket[static_cast<std::size_t>(j)] * vol -
           flux_integral(grid, base, j, zero_bc, options.flux_points);
  }
  Eigen::VectorXd c = solve_coupling(sol.coupling, r, sol.coupling_condition);
  sol.c.assign(c.data(), c.data() + n);

  sol.u = base;
  for (std::size_t i = 0; i < sol.u.size(); ++i) {
    auto idx = static_cast<int>(i);
    if (grid.kind(idx) == Grid::NodeKind::Interior) {
      for (int k = 0; k < n; ++k) sol.u[i] += c[k] * lifts.h[static_cast<std::size_t>(k)][i];
    } else {
      sol.u[i] = c[grid.region(idx)];
    }
  }

  BoundaryData bc = constant_boundary(sol.c, 0.0);
  for (int j = 0; j < n; ++j) {
    double g = 2.0 * (lambda * sol.c[static_cast<std::size_t>(j)] - psi_at_pocket[static_cast<std::size_t>(j)]);
    double f = flux_integral(grid, sol.u, j, bc, options.flux_points);
    sol.g.push_back(g);
    sol.flux.push_back(f);
    sol.flux_residual.push_back(f + 0.5 * w * g * geo.pocket(j).volume());
  }
  sol.interior_residual = discrete_residual(grid, sol.u, rhs, bc, lambda);
  return sol;
}

double ClosedForm1D::evaluate(double x) const {
  double p = wrap_unit(x);
  for (const auto& arc : arcs) {
    double s = wrap_unit(p - arc.left);
    if (s <= arc.length) return -s * s + arc.b * s + arc.u0;
  }
  for (const auto& ob : obstacles) {
    if (wrap_unit(p - ob.left) <= ob.length) {
      if (ob.region == Grid::kTargetRegion) throw DomainError("solution is not defined inside F");
      return c.at(static_cast<std::size_t>(ob.region));
    }
  }
  throw DomainError("point not covered by the arc decomposition");
}

double ClosedForm1D::flux(int k) const {
  double total = 0.0;
  for (const auto& arc : arcs) {
    if (arc.left_region == k) total += -arc.b;
    if (arc.right_region == k) total += -2.0 * arc.length + arc.b;
  }
  return total;
}

ClosedForm1D closed_form_1d(const Geometry& geometry, double sticky_weight) {
  if (geometry.dimension() != 1) throw ConfigError("closed form requires a one-dimensional geometry");
  if (!geometry.target()) throw ConfigError("the hitting problem needs a target region");
  ClosedForm1D out;
  const int n = geometry.pocket_count();
  for (int k = 0; k < n; ++k) {
    const Pocket& p = geometry.pocket(k);
    out.obstacles.push_back({wrap_unit(p.left()), p.length(), k});
  }
  const Pocket& F = *geometry.target();
  out.obstacles.push_back({wrap_unit(F.left()), F.length(), Grid::kTargetRegion});
  std::sort(out.obstacles.begin(), out.obstacles.end(),
            [](const Span1D& a, const Span1D& b) { return a.left < b.left; });

  const std::size_t m = out.obstacles.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Span1D& a = out.obstacles[i];
    const Span1D& b = out.obstacles[(i + 1) % m];
    double right_end = a.left + a.length;
    Arc1D arc;
    arc.left = wrap_unit(right_end);
    arc.length = wrap_unit(b.left - right_end);
    arc.left_region = a.region;
    arc.right_region = b.region;
    out.arcs.push_back(arc);
  }

  // Row k: sum over incident arcs of (c_k - u_other) / L = w len_k + sum L.
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd r(n);
  for (int k = 0; k < n; ++k) r[k] = sticky_weight * geometry.pocket(k).length();
  for (const auto& arc : out.arcs) {
    double L = arc.length;
    auto incident = [&](int self, int other) {
      if (self < 0) return;
      M(self, self) += 1.0 / L;
      if (other >= 0) M(self, other) -= 1.0 / L;
      r[self] += L;
    };
    incident(arc.left_region, arc.right_region);
    incident(arc.right_region, arc.left_region);
  }
  double condition = 0.0;
  Eigen::VectorXd c = solve_coupling(M, r, condition);
  out.c.assign(c.data(), c.data() + n);

  auto value = [&](int region) { return region < 0 ? 0.0 : out.c[static_cast<std::size_t>(region)]; };
  for (auto& arc : out.arcs) {
    double uL = value(arc.left_region), uR = value(arc.right_region);
    arc.u0 = uL;
    arc.b = (uR - uL + arc.length * arc.length) / arc.length;
  }
  return out;
}

}  // namespace pocketlab
