#include "sqabs/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sqabs/detail/radial_chain.hpp"
#include "sqabs/errors.hpp"

namespace sqabs {

namespace {

using D13 = detail::Dual<kNumFitParams>;
using ParamVec = Eigen::Matrix<double, kNumFitParams, 1>;

detail::ParamsT<D13> seed_chain(const SuperquadricParams& p) {
  detail::ParamsT<D13> q;
  q.eps1 = D13::variable(p.eps1, 0);
  q.eps2 = D13::variable(p.eps2, 1);
  q.ax = D13::variable(p.ax, 2);
  q.ay = D13::variable(p.ay, 3);
  q.az = D13::variable(p.az, 4);
  const detail::Vec3T<D13> w{D13::variable(0.0, 5), D13::variable(0.0, 6),
                             D13::variable(0.0, 7)};
  q.rot = detail::mul(detail::rotation_exp(w), p.rotation.toRotationMatrix());
  q.trans = {D13::variable(p.translation.x(), 8), D13::variable(p.translation.y(), 9),
             D13::variable(p.translation.z(), 10)};
  q.kx = D13::variable(p.kx, 11);
  q.ky = D13::variable(p.ky, 12);
  return q;
}

Eigen::Quaterniond exp_quat(const Vec3& w) {
  const double th = w.norm();
  if (th < 1e-12)
    return Eigen::Quaterniond(1.0, 0.5 * w.x(), 0.5 * w.y(), 0.5 * w.z()).normalized();
  return Eigen::Quaterniond(Eigen::AngleAxisd(th, w / th));
}

ParamVec pack(const SuperquadricParams& t) {
  ParamVec p;
  p << t.eps1, t.eps2, t.ax, t.ay, t.az, 0.0, 0.0, 0.0, t.translation.x(),
      t.translation.y(), t.translation.z(), t.kx, t.ky;
  return p;
}

SuperquadricParams unpack(const ParamVec& p, const Eigen::Quaterniond& base_rot) {
  SuperquadricParams t;
  t.eps1 = p[0];
  t.eps2 = p[1];
  t.ax = p[2];
  t.ay = p[3];
  t.az = p[4];
  t.rotation = (exp_quat(p.segment<3>(5)) * base_rot).normalized();
  t.translation = p.segment<3>(8);
  t.kx = p[11];
  t.ky = p[12];
  return t;
}

struct BoundsVec {
  ParamVec lo, hi;
};

BoundsVec make_bounds(const ParameterBounds& b, double bbox_diag) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double axis_max = b.axis_max_factor * bbox_diag;
  BoundsVec v;
  v.lo << b.eps_min, b.eps_min, b.axis_min, b.axis_min, b.axis_min, -inf, -inf,
      -inf, -inf, -inf, -inf, -b.taper_limit, -b.taper_limit;
  v.hi << b.eps_max, b.eps_max, axis_max, axis_max, axis_max, inf, inf, inf, inf,
      inf, inf, b.taper_limit, b.taper_limit;
  return v;
}

SuperquadricParams clamp_params(const SuperquadricParams& t, const BoundsVec& b) {
  ParamVec p = pack(t).cwiseMax(b.lo).cwiseMin(b.hi);
  return unpack(p, t.rotation);
}

double capped_ssd(const SuperquadricParams& t, const Points& pts, double sentinel) {
  double total = 0.0;
  for (const Vec3& x : pts) {
    const double d = std::min(radial_distance(t, x, sentinel), sentinel);
    total += d * d;
  }
  return total;
}

FitReport lm_run(const Points& pts, const SuperquadricParams& start,
                 const FitOptions& opt, const BoundsVec& bounds, double sentinel) {
  FitReport report;
  SuperquadricParams theta = clamp_params(start, bounds);
  double ssd = capped_ssd(theta, pts, sentinel);
  double lambda = 1e-3;
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    const auto [r, jac] = residuals_and_jacobian(theta, pts, sentinel);
    const ParamVec g = jac.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      report.converged = true;
      break;
    }
    const Eigen::Matrix<double, kNumFitParams, kNumFitParams> jtj =
        jac.transpose() * jac;
    bool accepted = false;
    while (lambda <= 1e12) {
      Eigen::Matrix<double, kNumFitParams, kNumFitParams> a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const ParamVec step = a.ldlt().solve(-g);
      const ParamVec p_try = (pack(theta) + step).cwiseMax(bounds.lo).cwiseMin(bounds.hi);
      const SuperquadricParams theta_try = unpack(p_try, theta.rotation);
      const double ssd_try = capped_ssd(theta_try, pts, sentinel);
      if (std::isfinite(ssd_try) && ssd_try < ssd) {
        const double drop = ssd - ssd_try;
        theta = theta_try;
        ssd = ssd_try;
        lambda = std::max(lambda * 0.25, 1e-12);
        accepted = true;
        if (drop < 1e-14 * (1.0 + ssd)) report.converged = true;
        break;
      }
      lambda *= 4.0;  // shrink the trust region; also the NaN recovery path
    }
    if (!accepted || report.converged) break;
  }
  report.theta = theta;
  report.final_ssd = ssd;
  report.iterations_used = iter;
  return report;
}

bool same_params(const SuperquadricParams& a, const SuperquadricParams& b) {
  return a.eps1 == b.eps1 && a.eps2 == b.eps2 && a.ax == b.ax && a.ay == b.ay &&
         a.az == b.az && a.kx == b.kx && a.ky == b.ky &&
         a.translation == b.translation &&
         a.rotation.coeffs() == b.rotation.coeffs();
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::MatrixXd> residuals_and_jacobian(
    const SuperquadricParams& theta, const Points& points, double sentinel) {
  const auto chain = seed_chain(theta);
  const int n = static_cast<int>(points.size());
  Eigen::VectorXd r(n);
  Eigen::MatrixXd jac(n, kNumFitParams);
  for (int i = 0; i < n; ++i) {
    const D13 d = detail::radial_distance_chain(chain, points[i], sentinel);
    if (d.v >= sentinel) {
      r[i] = sentinel;
      jac.row(i).setZero();
    } else {
      r[i] = d.v;
      jac.row(i) = d.g.transpose();
    }
  }
  return {std::move(r), std::move(jac)};
}

std::vector<SuperquadricParams> candidate_inits(const Points& points,
                                                const SuperquadricParams& base) {
  const double diag = points.empty() ? 0.0 : bbox_diagonal(points);
  const ParameterBounds pb;
  const double axis_max = diag > 0.0 ? pb.axis_max_factor * diag
                                     : std::numeric_limits<double>::infinity();
  auto clamp_axis = [&](double a) { return std::clamp(a, pb.axis_min, axis_max); };

  SuperquadricParams c0 = base;
  c0.eps1 = c0.eps2 = 1.0;
  c0.kx = c0.ky = 0.0;
  c0.ax = clamp_axis(base.ax);
  c0.ay = clamp_axis(base.ay);
  c0.az = clamp_axis(base.az);

  // x plays z: compose a 90-degree turn about y and swap the x/z axes.
  SuperquadricParams c1 = c0;
  c1.ax = c0.az;
  c1.az = c0.ax;
  c1.rotation =
      (base.rotation * Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitY())))
          .normalized();

  // y plays z: compose a 90-degree turn about x and swap the y/z axes.
  SuperquadricParams c2 = c0;
  c2.ay = c0.az;
  c2.az = c0.ay;
  c2.rotation =
      (base.rotation * Eigen::Quaterniond(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitX())))
          .normalized();

  return {c0, c1, c2};
}

FitReport fit_superquadric(const Points& points, const SuperquadricParams& init,
                           const FitOptions& options) {
  if (points.empty()) throw DegenerateInput("fit_superquadric: empty point set");
  const double diag = bbox_diagonal(points);
  const double sentinel = kSentinelDistance;
  if (diag <= 0.0) {
    FitReport r;
    r.theta = init;
    r.final_ssd = capped_ssd(init, points, sentinel);
    return r;
  }
  const BoundsVec bounds = make_bounds(options.bounds, diag);

  std::vector<SuperquadricParams> starts;
  starts.push_back(clamp_params(init, bounds));
  if (options.multistart) {
    for (const auto& c : candidate_inits(points, init)) {
      const SuperquadricParams cc = clamp_params(c, bounds);
      if (!same_params(cc, starts.front())) starts.push_back(cc);
    }
  }

  FitReport best;
  best.final_ssd = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    FitReport r = lm_run(points, start, options, bounds, sentinel);
    if (r.final_ssd < best.final_ssd) best = r;
  }
  return best;
}

}  // namespace sqabs
