#pragma once

#include <cmath>
#include <random>

#include "sqabs/geometry.hpp"
#include "sqabs/inference.hpp"

namespace test_support {

inline Eigen::Quaterniond random_rotation(sqabs::Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::Quaterniond q(n01(rng), n01(rng), n01(rng), n01(rng));
  while (q.norm() < 1e-6) q = Eigen::Quaterniond(n01(rng), n01(rng), n01(rng), n01(rng));
  return q.normalized();
}

inline sqabs::SuperquadricParams random_params(sqabs::Rng& rng, bool with_taper = true,
                                               bool with_pose = true) {
  std::uniform_real_distribution<double> u_eps(0.1, 2.0);
  std::uniform_real_distribution<double> u_axis(0.2, 2.0);
  std::uniform_real_distribution<double> u_k(-0.8, 0.8);
  std::uniform_real_distribution<double> u_t(-2.0, 2.0);
  sqabs::SuperquadricParams p;
  p.eps1 = u_eps(rng);
  p.eps2 = u_eps(rng);
  p.ax = u_axis(rng);
  p.ay = u_axis(rng);
  p.az = u_axis(rng);
  if (with_taper) {
    p.kx = u_k(rng);
    p.ky = u_k(rng);
  }
  if (with_pose) {
    p.rotation = random_rotation(rng);
    p.translation = sqabs::Vec3(u_t(rng), u_t(rng), u_t(rng));
  }
  return p;
}

inline sqabs::SuperquadricParams unit_sphere() { return sqabs::SuperquadricParams{}; }

// Scene used by several suites: three separated tapered primitives.
inline std::vector<sqabs::SuperquadricParams> three_primitive_layout() {
  sqabs::SuperquadricParams a;
  a.eps1 = 0.5;
  a.eps2 = 1.0;
  a.ax = 1.0;
  a.ay = 0.7;
  a.az = 0.5;
  a.kx = 0.3;
  a.translation = sqabs::Vec3(-4.0, 0.0, 0.0);

  sqabs::SuperquadricParams b;
  b.eps1 = 1.0;
  b.eps2 = 1.0;
  b.ax = 0.6;
  b.ay = 0.6;
  b.az = 1.2;
  b.ky = -0.4;
  b.translation = sqabs::Vec3(0.0, 0.0, 0.0);
  b.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.7, sqabs::Vec3(0.0, 1.0, 0.0)));

  sqabs::SuperquadricParams c;
  c.eps1 = 1.4;
  c.eps2 = 0.6;
  c.ax = 0.8;
  c.ay = 0.8;
  c.az = 0.8;
  c.translation = sqabs::Vec3(4.5, 0.5, 0.0);
  return {a, b, c};
}

// Fraction of identically-labeled pairs after the best greedy label
// matching; 1.0 means the partitions agree up to permutation.
inline double label_agreement(const std::vector<int>& predicted,
                              const std::vector<int>& truth) {
  const int kp = *std::max_element(predicted.begin(), predicted.end()) + 1;
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  std::vector<std::vector<int>> overlap(kp, std::vector<int>(kt, 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) ++overlap[predicted[i]][truth[i]];
  // each predicted cluster votes for its dominant true label
  int agree = 0;
  for (int a = 0; a < kp; ++a)
    agree += *std::max_element(overlap[a].begin(), overlap[a].end());
  return static_cast<double>(agree) / static_cast<double>(predicted.size());
}

}  // namespace test_support
