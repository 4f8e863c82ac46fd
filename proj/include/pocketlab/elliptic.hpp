#pragma once

// Finite-difference solvers for the problems with unknown constant boundary
// values on the pockets. The solution is assembled by superposition,
//
//   u = u~ + sum_k c_k h_k,
//
// where u~ has zero boundary values and the lift h_k is 1 on the boundary of
// D_k and 0 on the other boundaries. The c_k follow from one integral flux
// condition per pocket. Normals n point from U into the pocket.
//
// Hitting problem:  1/2 Laplacian u = -1 in U, u = 0 on the boundary of F,
//                   u = c_k on the boundary of D_k,
//                   integral <grad u, n> d nu_k = w Vol(D_k).
// Resolvent:        lambda f - 1/2 Laplacian f = psi in U, f = c_k on D_k,
//                   integral <grad f, n> d nu_k + (w / 2) g_k Vol(D_k) = 0,
// where A f(d_k) = g_k / 2 together with lambda f - A f = psi at d_k gives
// g_k = 2 (lambda c_k - psi(d_k)). The weight w is 1 unless set otherwise.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pocketlab/geometry.hpp"

namespace pocketlab {

// Regular periodic grid on the unit torus with n nodes per axis. Nodes in a
// pocket or in F are excluded; the arms of the remaining nodes are cut short
// where they cross a boundary (Shortley-Weller).
class Grid {
 public:
  static constexpr int kNoBoundary = -2;
  static constexpr int kTargetRegion = -1;

  enum class NodeKind { Interior, Pocket, Target };

  struct Arm {
    int neighbor = -1;  // node index, or -1 when the arm ends on a boundary
    double theta = 1.0; // arm length as a fraction of the spacing
    int boundary = kNoBoundary;  // pocket index, kTargetRegion, or kNoBoundary
    Point point{};      // boundary point when the arm is cut
  };

  // With with_target = false the target region is ignored.
  Grid(const Geometry& geometry, int n, bool with_target = true);

  const Geometry& geometry() const { return geometry_; }
  int dimension() const { return geometry_.dimension(); }
  int per_axis() const { return n_; }
  double spacing() const { return h_; }
  int node_count() const { return static_cast<int>(kind_.size()); }
  bool uses_target() const { return with_target_; }

  int index(int i, int j = 0) const;
  Point node(int idx) const;
  NodeKind kind(int idx) const { return kind_[static_cast<std::size_t>(idx)]; }
  // Pocket index of an excluded pocket node, kTargetRegion for a target node.
  int region(int idx) const { return region_[static_cast<std::size_t>(idx)]; }
  std::span<const Arm> arms(int idx) const;
  int interior_count() const { return interior_count_; }

 private:
  Geometry geometry_;
  int n_;
  double h_;
  bool with_target_;
  std::vector<NodeKind> kind_;
  std::vector<int> region_;
  std::vector<Arm> arms_;
  int interior_count_ = 0;
};

using GridField = std::vector<double>;
// Dirichlet value at a boundary point of region `region` (pocket index or
// Grid::kTargetRegion).
using BoundaryData = std::function<double(const Point&, int region)>;

BoundaryData constant_boundary(std::vector<double> pocket_values, double target_value = 0.0);
GridField sample_field(const Grid& grid, const std::function<double(const Point&)>& f);

// Discrete lambda u - 1/2 Laplacian_h u = rhs on interior nodes with Dirichlet
// data at the cut arms. The sparse LU factorisation is computed once and
// reused for every right-hand side.
class DirichletSolver {
 public:
  DirichletSolver(const Grid& grid, double lambda);
  ~DirichletSolver();
  DirichletSolver(const DirichletSolver&) = delete;
  DirichletSolver& operator=(const DirichletSolver&) = delete;

  // Excluded nodes receive the boundary data at their own position.
  GridField solve(const GridField& rhs, const BoundaryData& boundary) const;
  // Relative residual of the last solve.
  double last_residual() const { return last_residual_; }

 private:
  struct Impl;
  const Grid& grid_;
  double lambda_;
  std::unique_ptr<Impl> impl_;
  mutable double last_residual_ = 0.0;
};

GridField solve_dirichlet(const Grid& grid, const GridField& rhs, const BoundaryData& boundary, double lambda);

// max_i |r_i| / max_i (sum_j |A_ij u_j| + |b_i|) for the discrete equation.
double discrete_residual(const Grid& grid, const GridField& u, const GridField& rhs,
                         const BoundaryData& boundary, double lambda);

// Integral over the boundary of D_k of <grad u, n> under nu_k. In 2D the normal
// derivative is a one-sided three-point difference at 256 equally spaced
// boundary points (trapezoid rule); in 1D it is the exact derivative of the
// quadratic through the endpoint and the next two nodes, summed over both
// endpoints. Throws InsufficientStencil if the stencil meets excluded nodes.
double flux_integral(const Grid& grid, const GridField& u, int k, const BoundaryData& boundary,
                     int quadrature_points = 256);

// Value at an arbitrary point of U by quadratic interpolation (exact at
// nodes). Throws InsufficientStencil when the stencil meets excluded nodes.
double interpolate(const Grid& grid, const GridField& u, const Point& x);

struct EllipticOptions {
  double sticky_weight = 1.0;
  int flux_points = 256;
};

struct EllipticSolution {
  GridField u;                       // NaN on target nodes
  std::vector<double> c;
  std::vector<double> g;             // resolvent only
  double lambda = 0.0;
  std::vector<double> flux;          // integral <grad u, n> d nu_k of the assembled field
  std::vector<double> flux_residual;
  double interior_residual = 0.0;
  Eigen::MatrixXd coupling;
  double coupling_condition = 0.0;
};

// Value of a solution at x: c_k in pocket k, interpolated in U. Throws
// DomainError inside F.
double evaluate(const Grid& grid, const EllipticSolution& sol, const Point& x);

EllipticSolution solve_hitting_problem(const Grid& grid, const EllipticOptions& options = {});

// psi is sampled on U; psi_at_pocket[k] is its value at the collapsed point d_k.
EllipticSolution solve_resolvent(const Grid& grid, double lambda, const std::function<double(const Point&)>& psi,
                                 std::span<const double> psi_at_pocket, const EllipticOptions& options = {});

// Exact solution of the one-dimensional hitting problem: on each arc of U,
// u(s) = -s^2 + b s + u0 with s the distance from the arc's left end.
struct Arc1D {
  double left = 0.0;
  double length = 0.0;
  int left_region = 0;   // pocket index or Grid::kTargetRegion
  int right_region = 0;
  double b = 0.0;
  double u0 = 0.0;
};

struct Span1D {
  double left = 0.0;
  double length = 0.0;
  int region = 0;
};

struct ClosedForm1D {
  std::vector<Arc1D> arcs;
  std::vector<Span1D> obstacles;  // pockets and F
  std::vector<double> c;

  // Throws DomainError inside F.
  double evaluate(double x) const;
  // integral <u', n> over both endpoints of pocket k.
  double flux(int k) const;
};

ClosedForm1D closed_form_1d(const Geometry& geometry, double sticky_weight = 1.0);

}  // namespace pocketlab
