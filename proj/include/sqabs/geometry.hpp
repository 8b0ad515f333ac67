#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <optional>
#include <random>
#include <vector>

namespace sqabs {

using Vec3 = Eigen::Vector3d;
using Points = std::vector<Vec3>;
using Rng = std::mt19937_64;

// Shape-exponent stability bounds. Below 0.1 the surface develops
// near-singular corners; above 2.0 the shape turns concave.
inline constexpr double kEpsMin = 0.1;
inline constexpr double kEpsMax = 2.0;

// A taper scale factor at or below this is treated as a collapsed plane:
// the inverse taper is undefined there.
inline constexpr double kDegenerateTaperEps = 1e-6;

// Distance reported for points the primitive cannot explain (degenerate
// taper plane). Large enough to zero out any mixture responsibility.
inline constexpr double kSentinelDistance = 1e6;

// Tapered superquadric: shape exponents, semi-axes, rigid pose, and the
// linear taper factors applied along the local z axis.
struct SuperquadricParams {
  double eps1 = 1.0;
  double eps2 = 1.0;
  double ax = 1.0;
  double ay = 1.0;
  double az = 1.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();
  double kx = 0.0;
  double ky = 0.0;

  bool valid(double rot_tol = 1e-9) const;
  double min_axis() const { return std::min(ax, std::min(ay, az)); }
  double mean_axis() const { return (ax + ay + az) / 3.0; }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  double area() const;
  bool indices_valid() const;
};

// Canonical-frame surface point at angular parameters (eta, omega).
// Uses only exponents and semi-axes; pose and taper are applied separately.
Vec3 surface_point(const SuperquadricParams& params, double eta, double omega);

// Inside-outside function in the canonical (untapered, unposed) frame:
// < 1 inside, 1 on the surface, > 1 outside. The origin maps to 0.
double implicit_value(const SuperquadricParams& params, const Vec3& p);

Vec3 taper_point(const Vec3& p, double kx, double ky, double az);

// Inverse of taper_point. Empty when a scale factor collapses below
// kDegenerateTaperEps, in which case the point cannot be explained by
// this primitive.
std::optional<Vec3> untaper_point(const Vec3& p, double kx, double ky, double az);

// World point -> canonical frame (inverse rigid transform, then inverse
// taper). Empty on a degenerate taper plane.
std::optional<Vec3> to_canonical(const SuperquadricParams& params, const Vec3& x);

// Canonical point -> world frame (taper, then rigid transform).
Vec3 from_canonical(const SuperquadricParams& params, const Vec3& p);

// Distance from x to the surface measured along the ray through the
// primitive's origin, evaluated in the canonical frame. Degenerate taper
// yields `sentinel`; a query at the origin yields the smallest semi-axis.
double radial_distance(const SuperquadricParams& params, const Vec3& x,
                       double sentinel = kSentinelDistance);

// Approximately area-uniform samples of the untapered canonical surface.
Points sample_surface_canonical(const SuperquadricParams& params, int n, Rng& rng);

// Approximately area-uniform samples of the tapered, posed surface.
Points sample_surface(const SuperquadricParams& params, int n, Rng& rng);

// Watertight eta/omega grid mesh of the tapered, posed primitive.
// resolution >= 4; vertex count = resolution^2 + 2 poles.
TriangleMesh mesh(const SuperquadricParams& params, int resolution);

// Axis-aligned bounds of a non-empty point set.
std::pair<Vec3, Vec3> bounding_box(const Points& points);
double bbox_diagonal(const Points& points);

double sum_squared_radial(const SuperquadricParams& params, const Points& points,
                          double sentinel = kSentinelDistance);

}  // namespace sqabs
