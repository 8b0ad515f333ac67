#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "sqabs/detail/dual.hpp"
#include "sqabs/geometry.hpp"

// Scalar-generic evaluation of the canonical-frame chain
// (inverse rigid transform -> inverse taper -> implicit function -> radial
// distance). Instantiated with double at runtime and with Dual<13> when the
// fitter needs exact parameter derivatives.

namespace sqabs::detail {

template <class T>
struct Vec3T {
  T x, y, z;
};

template <class T>
struct Mat3T {
  T m[3][3];
};

template <class T>
Vec3T<T> mul_transpose(const Mat3T<T>& a, const Vec3T<T>& v) {
  return {a.m[0][0] * v.x + a.m[1][0] * v.y + a.m[2][0] * v.z,
          a.m[0][1] * v.x + a.m[1][1] * v.y + a.m[2][1] * v.z,
          a.m[0][2] * v.x + a.m[1][2] * v.y + a.m[2][2] * v.z};
}

template <class T>
Mat3T<T> mul(const Mat3T<T>& a, const Eigen::Matrix3d& b) {
  Mat3T<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.m[i][j] = a.m[i][0] * b(0, j) + a.m[i][1] * b(1, j) + a.m[i][2] * b(2, j);
  return r;
}

template <class T>
Mat3T<T> from_matrix(const Eigen::Matrix3d& b) {
  Mat3T<T> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = T(b(i, j));
  return r;
}

// Rodrigues exponential map; series branch keeps it smooth through w = 0,
// which is where the fitter always evaluates it.
template <class T>
Mat3T<T> rotation_exp(const Vec3T<T>& w) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const T t = w.x * w.x + w.y * w.y + w.z * w.z;  // squared angle
  T a, b;
  if (value(t) < 1e-12) {
    a = 1.0 - t / 6.0;
    b = 0.5 - t / 24.0;
  } else {
    const T th = sqrt(t);
    a = sin(th) / th;
    b = (1.0 - cos(th)) / t;
  }
  Mat3T<T> r;
  r.m[0][0] = 1.0 + b * (-w.z * w.z - w.y * w.y);
  r.m[0][1] = -a * w.z + b * (w.x * w.y);
  r.m[0][2] = a * w.y + b * (w.x * w.z);
  r.m[1][0] = a * w.z + b * (w.x * w.y);
  r.m[1][1] = 1.0 + b * (-w.z * w.z - w.x * w.x);
  r.m[1][2] = -a * w.x + b * (w.y * w.z);
  r.m[2][0] = -a * w.y + b * (w.x * w.z);
  r.m[2][1] = a * w.x + b * (w.y * w.z);
  r.m[2][2] = 1.0 + b * (-w.y * w.y - w.x * w.x);
  return r;
}

// base^expo for base >= 0, exact zero below the representable floor.
template <class T>
T pow_pos(const T& base, const T& expo) {
  using std::exp;
  using std::log;
  if (value(base) < 1e-300) return T(0.0);
  return exp(expo * log(base));
}

template <class T>
T pow_abs(const T& u, const T& expo) {
  using std::abs;
  return pow_pos(abs(u), expo);
}

template <class T>
const T& min3(const T& a, const T& b, const T& c) {
  const T& ab = value(a) < value(b) ? a : b;
  return value(ab) < value(c) ? ab : c;
}

// Full parameter set with a scalar-generic rotation matrix
// (world-from-canonical).
template <class T>
struct ParamsT {
  T eps1, eps2, ax, ay, az, kx, ky;
  Mat3T<T> rot;
  Vec3T<T> trans;
};

template <class T>
T implicit_value_chain(const T& eps1, const T& eps2, const T& ax, const T& ay,
                       const T& az, const Vec3T<T>& c) {
  const T two(2.0);
  const T t1 = pow_abs(c.x / ax, two / eps2);
  const T t2 = pow_abs(c.y / ay, two / eps2);
  const T txy = pow_pos(t1 + t2, eps2 / eps1);
  const T tz = pow_abs(c.z / az, two / eps1);
  return txy + tz;
}

template <class T>
T radial_distance_chain(const ParamsT<T>& q, const Eigen::Vector3d& x,
                        double sentinel) {
  using std::abs;
  using std::sqrt;
  const Vec3T<T> y{T(x.x()) - q.trans.x, T(x.y()) - q.trans.y, T(x.z()) - q.trans.z};
  const Vec3T<T> r = mul_transpose(q.rot, y);
  const T sx = q.kx * r.z / q.az + 1.0;
  const T sy = q.ky * r.z / q.az + 1.0;
  if (value(sx) <= kDegenerateTaperEps || value(sy) <= kDegenerateTaperEps)
    return T(sentinel);
  const Vec3T<T> c{r.x / sx, r.y / sy, r.z};
  const T rr = sqrt(c.x * c.x + c.y * c.y + c.z * c.z);
  if (value(rr) < 1e-9) return min3(q.ax, q.ay, q.az);
  const T f = implicit_value_chain(q.eps1, q.eps2, q.ax, q.ay, q.az, c);
  const T ray_scale = pow_pos(f, q.eps1 * -0.5);  // |mu| / |c|
  return rr * abs(1.0 - ray_scale);
}

}  // namespace sqabs::detail
