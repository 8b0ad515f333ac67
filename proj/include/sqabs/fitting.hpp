#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "sqabs/geometry.hpp"

namespace sqabs {

struct ParameterBounds {
  double eps_min = kEpsMin;
  double eps_max = kEpsMax;
  double taper_limit = 1.0;
  double axis_min = 1e-4;
  // Semi-axis upper bound, as a multiple of the data bounding-box diagonal.
  double axis_max_factor = 2.0;
};

struct FitOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-10;
  ParameterBounds bounds;
  bool multistart = true;
};

struct FitReport {
  SuperquadricParams theta;
  double final_ssd = 0.0;
  bool converged = false;
  int iterations_used = 0;
};

// Free-parameter layout shared by the Jacobian columns and the solver:
// [eps1, eps2, ax, ay, az, w0 w1 w2, tx ty tz, kx, ky], where w is a
// rotation tangent increment composed onto the current rotation
// (Exp(w) * R) and is always zero at the evaluation point.
inline constexpr int kNumFitParams = 13;

// Radial-distance residuals and their exact parameter Jacobian
// (forward-mode). Points the primitive cannot explain get a capped
// residual and a zero Jacobian row.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> residuals_and_jacobian(
    const SuperquadricParams& theta, const Points& points,
    double sentinel = kSentinelDistance);

// The base ellipsoid plus its two axis relabelings, covering the three
// choices of which principal axis plays z. Exponents and taper are reset
// so each candidate is the same world-space ellipsoid.
std::vector<SuperquadricParams> candidate_inits(const Points& points,
                                                const SuperquadricParams& base);

// Bounded Levenberg-Marquardt on the summed squared radial distance,
// optionally multi-started from the axis relabelings of `init`.
FitReport fit_superquadric(const Points& points, const SuperquadricParams& init,
                           const FitOptions& options = {});

}  // namespace sqabs
