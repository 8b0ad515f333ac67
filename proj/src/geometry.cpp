#include "sqabs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sqabs/detail/radial_chain.hpp"

namespace sqabs {

namespace {

double signed_pow(double u, double e) {
  if (u == 0.0) return 0.0;
  const double m = std::pow(std::abs(u), e);
  return u < 0.0 ? -m : m;
}

detail::ParamsT<double> make_chain(const SuperquadricParams& p) {
  detail::ParamsT<double> q;
  q.eps1 = p.eps1;
  q.eps2 = p.eps2;
  q.ax = p.ax;
  q.ay = p.ay;
  q.az = p.az;
  q.kx = p.kx;
  q.ky = p.ky;
  q.rot = detail::from_matrix<double>(p.rotation.toRotationMatrix());
  q.trans = {p.translation.x(), p.translation.y(), p.translation.z()};
  return q;
}

// Area element |dq/deta x dq/domega| of the (optionally tapered) surface map,
// by central differences.
double area_element(const SuperquadricParams& p, double eta, double omega,
                    bool tapered) {
  constexpr double h = 1e-5;
  auto eval = [&](double e, double o) {
    Vec3 s = surface_point(p, e, o);
    return tapered ? taper_point(s, p.kx, p.ky, p.az) : s;
  };
  const Vec3 de = (eval(eta + h, omega) - eval(eta - h, omega)) / (2.0 * h);
  const Vec3 dw = (eval(eta, omega + h) - eval(eta, omega - h)) / (2.0 * h);
  return de.cross(dw).norm();
}

// Uniform (eta, omega) proposals reweighted by the local area element,
// then resampled with replacement.
std::vector<std::pair<double, double>> area_weighted_angles(
    const SuperquadricParams& p, int n, bool tapered, Rng& rng) {
  const int pool = std::max(4096, 4 * n);
  std::uniform_real_distribution<double> u_eta(-M_PI / 2.0, M_PI / 2.0);
  std::uniform_real_distribution<double> u_omega(-M_PI, M_PI);
  std::vector<std::pair<double, double>> angles(pool);
  std::vector<double> cdf(pool);
  double total = 0.0;
  for (int i = 0; i < pool; ++i) {
    angles[i] = {u_eta(rng), u_omega(rng)};
    total += area_element(p, angles[i].first, angles[i].second, tapered);
    cdf[i] = total;
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::pair<double, double>> out(n);
  for (int k = 0; k < n; ++k) {
    const double u = u01(rng) * total;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    out[k] = angles[it == cdf.end() ? pool - 1 : it - cdf.begin()];
  }
  return out;
}

}  // namespace

bool SuperquadricParams::valid(double rot_tol) const {
  const bool finite = std::isfinite(eps1) && std::isfinite(eps2) &&
                      std::isfinite(ax) && std::isfinite(ay) && std::isfinite(az) &&
                      std::isfinite(kx) && std::isfinite(ky) &&
                      translation.allFinite() && rotation.coeffs().allFinite();
  if (!finite) return false;
  if (eps1 < kEpsMin || eps1 > kEpsMax || eps2 < kEpsMin || eps2 > kEpsMax)
    return false;
  if (ax <= 0.0 || ay <= 0.0 || az <= 0.0) return false;
  if (std::abs(kx) > 1.0 || std::abs(ky) > 1.0) return false;
  return std::abs(rotation.norm() - 1.0) <= rot_tol;
}

double TriangleMesh::area() const {
  double a = 0.0;
  for (const auto& t : triangles) {
    const Vec3 e1 = vertices[t[1]] - vertices[t[0]];
    const Vec3 e2 = vertices[t[2]] - vertices[t[0]];
    a += 0.5 * e1.cross(e2).norm();
  }
  return a;
}

bool TriangleMesh::indices_valid() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles) {
    for (int idx : t)
      if (idx < 0 || idx >= n) return false;
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return false;
  }
  return true;
}

Vec3 surface_point(const SuperquadricParams& params, double eta, double omega) {
  const double ce = signed_pow(std::cos(eta), params.eps1);
  const double se = signed_pow(std::sin(eta), params.eps1);
  const double cw = signed_pow(std::cos(omega), params.eps2);
  const double sw = signed_pow(std::sin(omega), params.eps2);
  return {params.ax * ce * cw, params.ay * ce * sw, params.az * se};
}

double implicit_value(const SuperquadricParams& params, const Vec3& p) {
  const detail::Vec3T<double> c{p.x(), p.y(), p.z()};
  return detail::implicit_value_chain(params.eps1, params.eps2, params.ax,
                                      params.ay, params.az, c);
}

Vec3 taper_point(const Vec3& p, double kx, double ky, double az) {
  const double sx = kx * p.z() / az + 1.0;
  const double sy = ky * p.z() / az + 1.0;
  return {sx * p.x(), sy * p.y(), p.z()};
}

std::optional<Vec3> untaper_point(const Vec3& p, double kx, double ky, double az) {
  const double sx = kx * p.z() / az + 1.0;
  const double sy = ky * p.z() / az + 1.0;
  if (sx <= kDegenerateTaperEps || sy <= kDegenerateTaperEps) return std::nullopt;
  return Vec3{p.x() / sx, p.y() / sy, p.z()};
}

std::optional<Vec3> to_canonical(const SuperquadricParams& params, const Vec3& x) {
  const Vec3 local = params.rotation.conjugate() * (x - params.translation);
  return untaper_point(local, params.kx, params.ky, params.az);
}

Vec3 from_canonical(const SuperquadricParams& params, const Vec3& p) {
  return params.rotation * taper_point(p, params.kx, params.ky, params.az) +
         params.translation;
}

double radial_distance(const SuperquadricParams& params, const Vec3& x,
                       double sentinel) {
  return detail::radial_distance_chain(make_chain(params), x, sentinel);
}

Points sample_surface_canonical(const SuperquadricParams& params, int n, Rng& rng) {
  Points out;
  out.reserve(n);
  for (const auto& [eta, omega] : area_weighted_angles(params, n, false, rng))
    out.push_back(surface_point(params, eta, omega));
  return out;
}

Points sample_surface(const SuperquadricParams& params, int n, Rng& rng) {
  Points out;
  out.reserve(n);
  for (const auto& [eta, omega] : area_weighted_angles(params, n, true, rng))
    out.push_back(from_canonical(params, surface_point(params, eta, omega)));
  return out;
}

std::pair<Vec3, Vec3> bounding_box(const Points& points) {
  if (points.empty()) throw std::invalid_argument("bounding_box: empty point set");
  Vec3 lo = points.front();
  Vec3 hi = points.front();
  for (const Vec3& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

double bbox_diagonal(const Points& points) {
  const auto [lo, hi] = bounding_box(points);
  return (hi - lo).norm();
}

double sum_squared_radial(const SuperquadricParams& params, const Points& points,
                          double sentinel) {
  double total = 0.0;
  for (const Vec3& p : points) {
    const double d = radial_distance(params, p, sentinel);
    total += d * d;
  }
  return total;
}

TriangleMesh mesh(const SuperquadricParams& params, int resolution) {
  if (resolution < 4) throw std::invalid_argument("mesh: resolution must be >= 4");
  const int r = resolution;
  TriangleMesh m;
  m.vertices.reserve(r * r + 2);
  for (int i = 0; i < r; ++i) {
    const double eta = -M_PI / 2.0 + (i + 1) * M_PI / (r + 1);
    for (int j = 0; j < r; ++j) {
      const double omega = -M_PI + (j + 1) * 2.0 * M_PI / r;
      m.vertices.push_back(from_canonical(params, surface_point(params, eta, omega)));
    }
  }
  const int south = r * r;
  const int north = r * r + 1;
  m.vertices.push_back(from_canonical(params, Vec3{0.0, 0.0, -params.az}));
  m.vertices.push_back(from_canonical(params, Vec3{0.0, 0.0, params.az}));

  auto vid = [r](int i, int j) { return i * r + (j % r); };
  for (int j = 0; j < r; ++j) {
    m.triangles.push_back({south, vid(0, j), vid(0, j + 1)});
    m.triangles.push_back({north, vid(r - 1, j + 1), vid(r - 1, j)});
  }
  for (int i = 0; i + 1 < r; ++i) {
    for (int j = 0; j < r; ++j) {
      m.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      m.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return m;
}

}  // namespace sqabs
