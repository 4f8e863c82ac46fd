#pragma once

// Law of one passage through a pocket: the process starts on the pocket
// boundary (radius R) and runs until it first reaches radius R + h. Inside
// the ball of radius R + h the radial part is a one-dimensional diffusion
// with generator
//
//   (1/2) r^{1-d} (r^{d-1} sigma u')',  sigma = 1 + c (1 - r^2/R^2)^2 for r < R, 1 beyond,
//
// so the law of the passage follows from this operator alone. It is computed
// on a finite-volume grid that is uniform in w = int dr / sqrt(sigma), which
// resolves the layer of width R / sqrt(c) at the boundary.
//
//  - The passage time comes from the eigen-expansion of the discrete
//    operator with a killing boundary at R + h.
//  - In 1D the time is tabulated jointly with the exit side.
//  - In 2D the angular increment is, given the radial path, Gaussian with
//    variance V = int sigma / r^2 dt, so its Fourier coefficients are
//    E exp(-m^2 V / 2). Each one solves a steady radial problem.
//
// A 2D sample draws the time and the angle from their marginals.

#include <cstdint>
#include <vector>

#include "pocketlab/random.hpp"

namespace pocketlab {

struct PassageSample {
  double time = 0.0;
  // 1D: +1 when the exit is on the entry side, -1 for the opposite side.
  int side = 1;
  // 2D: signed angular increment.
  double angle = 0.0;
};

class PassageLaw {
 public:
  // c = amplitude / eps. `cells` is the number of grid cells on (0, R + h).
  PassageLaw(int dim, double R, double c, double h, int cells = 400);

  int dimension() const { return dim_; }
  double radius() const { return R_; }
  double height() const { return h_; }

  // Mean passage time of the discrete model.
  double mean_time() const { return mean_time_; }
  // 1D: probability that the exit is on the entry side.
  double same_side_probability() const { return p_same_; }
  // 2D: E cos(m * angle) for m = 1, 2, ... (index m - 1).
  const std::vector<double>& angle_coefficients() const { return phi_; }

  // P(T <= t), all sides together.
  double time_cdf(double t) const;

  PassageSample sample(RandomStream& rng) const;

 private:
  struct Table {
    std::vector<double> log_t;
    std::vector<double> cdf;  // normalised to end at 1
    double draw(double u) const;
  };

  int dim_;
  double R_, c_, h_;
  double mean_time_ = 0.0;
  double p_same_ = 1.0;
  std::vector<double> phi_;
  Table all_, same_, other_;
  std::vector<double> theta_, theta_cdf_;  // |angle| on [0, pi]
};

}  // namespace pocketlab
