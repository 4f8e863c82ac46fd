#pragma once

#include <vector>

#include "pocketlab/geometry.hpp"

namespace pocketlab {

// Coefficient a(x) of the fast operator. Zero on U; inside pocket k of
// radius R centred at c it is the quartic bump
//
//   a(x) = A_k (1 - |x - c|^2 / R^2)^2,
//
// which vanishes quadratically at the boundary: a = psi_k h^2 + O(h^3) with
// h = dist(x, boundary) and psi_k = 4 A_k / R^2.
class DiffusivityField {
 public:
  struct Local {
    int pocket = -1;    // pocket containing x, or -1 on U
    double value = 0.0;
    Point gradient{};
    double depth = 0.0; // distance to the pocket boundary (0 on U)
  };

  DiffusivityField(Geometry geometry, std::vector<double> amplitudes);

  const Geometry& geometry() const { return geometry_; }
  double amplitude(int k) const { return amplitudes_.at(static_cast<std::size_t>(k)); }

  double value(const Point& x) const;
  Point gradient(const Point& x) const;
  Local local(const Point& x) const;

  // Boundary profile psi_k; constant along the boundary of a ball.
  double profile(int k) const;
  // Envelope constants with c1 h^2 <= a <= c2 h^2 throughout pocket k.
  double envelope_lower(int k) const;
  double envelope_upper(int k) const;

 private:
  Geometry geometry_;
  std::vector<double> amplitudes_;
};

// Parameters of the barrier function w(h) used to bound the time spent in the
// boundary layer of a pocket. r and R are the infimum and supremum of psi.
struct BarrierParams {
  double delta = 0.0;
  double eps = 0.0;
  double r = 0.0;
  double R = 0.0;
};

// w(h) = (2R/r) * integral_0^h (delta - t) / (eps + R t^2) dt, evaluated in
// closed form. Throws DomainError for h outside [0, delta].
double barrier_w(double h, const BarrierParams& p);
double barrier_w_prime(double h, const BarrierParams& p);
double barrier_w_second(double h, const BarrierParams& p);

struct SupersolutionReport {
  double max_operator = 0.0;  // max of (M + L/eps) u over the samples
  double max_a1 = 0.0;        // principal part, identically -2R/r
  double max_abs_a2 = 0.0;    // cubic remainder of a
  double max_abs_a3 = 0.0;    // gradient remainder and curvature term
  double sup_u = 0.0;         // 2 eps w(delta), the supremum of u over the pocket
  int samples = 0;
};

// Evaluates (M + eps^-1 L) applied to u(x) = 2 eps w(h(x)) at `samples`
// deterministic points of the open layer 0 < h < delta inside pocket k,
// using exact derivatives. Throws DeltaTooLarge if delta is not admissible.
SupersolutionReport verify_supersolution(const DiffusivityField& field, int k, double delta, double eps,
                                         int samples);

}  // namespace pocketlab
