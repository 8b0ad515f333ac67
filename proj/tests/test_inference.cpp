#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sqabs/errors.hpp"
#include "sqabs/inference.hpp"
#include "support.hpp"

using namespace sqabs;
using test_support::random_params;
using test_support::unit_sphere;

namespace {

ClusterState two_sphere_state(double separation, double sigma2, int per_cluster, Rng& rng) {
  GstmComponent left{unit_sphere(), 1e-4};
  GstmComponent right{unit_sphere(), 1e-4};
  right.theta.translation = Vec3(separation, 0.0, 0.0);
  ClusterState state;
  const Points a = gstm_samples(left, per_cluster, rng);
  const Points b = gstm_samples(right, per_cluster, rng);
  state.points = a;
  state.points.insert(state.points.end(), b.begin(), b.end());
  state.labels.assign(2 * per_cluster, 0);
  GstmComponent joint{moi_ellipsoid(state.points), sigma2};
  state.components = {joint};
  state.counts = {2 * per_cluster};
  return state;
}

}  // namespace

TEST_CASE("gstm samples sit on the surface when noiseless") {
  Rng rng(3);
  const auto params = random_params(rng);
  for (const Vec3& x : gstm_samples({params, 0.0}, 200, rng))
    REQUIRE(radial_distance(params, x) <= 1e-9);
}

TEST_CASE("gstm noise has the requested scale and zero mean") {
  Rng rng(5);
  const double sigma = 0.05;
  const GstmComponent comp{unit_sphere(), sigma * sigma};
  const int n = 10000;
  const Points pts = gstm_samples(comp, n, rng);
  double sum = 0.0, sum_sq = 0.0;
  for (const Vec3& x : pts) {
    const double tau = x.norm() - 1.0;
    sum += tau;
    sum_sq += tau * tau;
  }
  const double mean = sum / n;
  const double stddev = std::sqrt(sum_sq / n - mean * mean);
  CHECK(stddev == doctest::Approx(sigma).epsilon(0.03));
  CHECK(std::abs(mean) <= 4.0 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("point_log_density matches the closed form") {
  const GstmComponent sphere{unit_sphere(), 1.0};
  const double on_surface = point_log_density(Vec3(1, 0, 0), sphere);
  CHECK(on_surface == doctest::Approx(-std::log(2.0 * std::sqrt(2.0 * M_PI))).epsilon(1e-12));
  CHECK(point_log_density(Vec3(2, 0, 0), sphere) ==
        doctest::Approx(-std::log(2.0 * std::sqrt(2.0 * M_PI)) - 0.5).epsilon(1e-12));

  const GstmComponent tight{unit_sphere(), 0.01};
  CHECK(point_log_density(Vec3(1.05, 0, 0), tight) >
        point_log_density(Vec3(1.4, 0, 0), tight));
  // sentinel distances stay finite
  SuperquadricParams collapsed = unit_sphere();
  collapsed.kx = 1.0;
  CHECK(std::isfinite(point_log_density(Vec3(0.5, 0.5, -1.0), {collapsed, 0.01})));
}

TEST_CASE("kmeans_init separates well-separated blobs") {
  Rng rng(7);
  std::normal_distribution<double> n01(0.0, 0.2);
  Points pts;
  for (int i = 0; i < 60; ++i) pts.push_back(Vec3(n01(rng), n01(rng), n01(rng)));
  for (int i = 0; i < 40; ++i) pts.push_back(Vec3(10 + n01(rng), n01(rng), n01(rng)));
  const auto labels = kmeans_init(pts, 2, rng);
  for (int i = 1; i < 60; ++i) REQUIRE(labels[i] == labels[0]);
  for (int i = 61; i < 100; ++i) REQUIRE(labels[i] == labels[60]);
  REQUIRE(labels[0] != labels[60]);
}

TEST_CASE("kmeans_init edge cases and determinism") {
  Rng rng(9);
  Points pts = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 2, 0), Vec3(3, 1, 0)};
  const auto labels = kmeans_init(pts, 4, rng);
  std::vector<int> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3});

  CHECK_THROWS_AS(kmeans_init(pts, 5, rng), DegenerateInput);

  Rng r1(42), r2(42);
  Points cloud;
  std::uniform_real_distribution<double> u(-1, 1);
  Rng gen(100);
  for (int i = 0; i < 300; ++i) cloud.push_back(Vec3(u(gen), u(gen), u(gen)));
  CHECK(kmeans_init(cloud, 7, r1) == kmeans_init(cloud, 7, r2));
}

TEST_CASE("moi_ellipsoid recovers a quarter-inertia ball") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Points ball;
  while (ball.size() < 20000) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() <= 1.0) ball.push_back(p);
  }
  const auto params = moi_ellipsoid(ball);
  CHECK(params.ax == doctest::Approx(0.5).epsilon(0.10));
  CHECK(params.ay == doctest::Approx(0.5).epsilon(0.10));
  CHECK(params.az == doctest::Approx(0.5).epsilon(0.10));
  CHECK(params.eps1 == 1.0);
  CHECK(params.eps2 == 1.0);
  CHECK(params.translation.norm() <= 0.02);
}

TEST_CASE("moi_ellipsoid floors degenerate inputs") {
  const Points repeated(5, Vec3(1.0, 2.0, 3.0));
  const auto params = moi_ellipsoid(repeated);
  CHECK(params.translation.isApprox(Vec3(1, 2, 3), 1e-12));
  CHECK(params.ax > 0.0);
  CHECK(params.ay > 0.0);
  CHECK(params.az > 0.0);
  CHECK(params.valid(1e-9));
}

TEST_CASE("moi_ellipsoid rotates with the data") {
  Rng rng(13);
  std::normal_distribution<double> n01(0.0, 1.0);
  Points pts;
  for (int i = 0; i < 4000; ++i)
    pts.push_back(Vec3(2.0 * n01(rng), 0.9 * n01(rng), 0.3 * n01(rng)));
  const auto base = moi_ellipsoid(pts);

  const Eigen::Quaterniond q = test_support::random_rotation(rng);
  Points rotated(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) rotated[i] = q * pts[i];
  const auto moved = moi_ellipsoid(rotated);

  CHECK(moved.ax == doctest::Approx(base.ax).epsilon(1e-9));
  CHECK(moved.ay == doctest::Approx(base.ay).epsilon(1e-9));
  CHECK(moved.az == doctest::Approx(base.az).epsilon(1e-9));
  // principal directions rotate with the data (up to per-axis sign)
  const Eigen::Matrix3d expected = (q * base.rotation).toRotationMatrix();
  const Eigen::Matrix3d got = moved.rotation.toRotationMatrix();
  for (int c = 0; c < 3; ++c)
    CHECK(std::abs(expected.col(c).dot(got.col(c))) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("assignment probabilities reproduce the population-times-likelihood rule") {
  // One cluster of 99 other points, likelihood 0.2 at the probe, alpha 0.5,
  // p0 0.1: P(existing) = 99*0.2 / (99*0.2 + 0.05).
  const double sigma = 1.0 / (0.4 * std::sqrt(2.0 * M_PI));  // density 0.2 on the surface
  const GstmComponent comp{unit_sphere(), sigma * sigma};
  SamplerConfig config;
  config.alpha = 0.5;
  config.p0 = 0.1;

  const Vec3 probe(1.0, 0.0, 0.0);
  const auto probs = assignment_probabilities(probe, {comp}, {99}, config);
  REQUIRE(probs.size() == 2);
  const double expected_existing = 99.0 * 0.2 / (99.0 * 0.2 + 0.5 * 0.1);
  CHECK(probs[0] == doctest::Approx(expected_existing).epsilon(1e-12));
  CHECK(probs[1] == doctest::Approx(1.0 - expected_existing).epsilon(1e-9));
  CHECK(probs[0] + probs[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("new-cluster probability vanishes as alpha goes to zero") {
  const GstmComponent comp{unit_sphere(), 0.05};
  SamplerConfig config;
  config.alpha = 1e-12;
  const auto probs = assignment_probabilities(Vec3(1.1, 0, 0), {comp}, {50}, config);
  CHECK(probs.back() <= 1e-10);
}

TEST_CASE("sample_assignments keeps the state consistent and normalized") {
  Rng rng(17);
  ClusterState state = two_sphere_state(8.0, 0.25, 120, rng);
  SamplerConfig config;
  sample_assignments(state, config, rng);
  CHECK(state.consistent());
  CHECK(std::accumulate(state.counts.begin(), state.counts.end(), 0) == 240);
}

TEST_CASE("assignments go greedy nearest in the small-noise small-alpha limit") {
  Rng rng(19);
  GstmComponent a{unit_sphere(), 1e-8};
  GstmComponent b{unit_sphere(), 1e-8};
  b.theta.translation = Vec3(6, 0, 0);

  ClusterState state;
  state.components = {a, b};
  Points pa = gstm_samples(a, 50, rng);
  Points pb = gstm_samples(b, 50, rng);
  state.points = pa;
  state.points.insert(state.points.end(), pb.begin(), pb.end());
  // mostly right labels with a few planted mistakes on each side
  state.labels.assign(50, 0);
  state.labels.resize(100, 1);
  for (int i = 10; i < 15; ++i) state.labels[i] = 1;
  for (int i = 60; i < 65; ++i) state.labels[i] = 0;
  state.counts = {50, 50};

  SamplerConfig config;
  config.alpha = 1e-250;
  sample_assignments(state, config, rng);
  CHECK(state.consistent());
  REQUIRE(state.cluster_count() == 2);
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    const double da = radial_distance(state.components[0].theta, state.points[i]);
    const double db = radial_distance(state.components[1].theta, state.points[i]);
    REQUIRE(state.labels[i] == (da <= db ? 0 : 1));
  }
}

TEST_CASE("precision draws follow the gamma conditional") {
  Rng rng(23);
  const int draws = 10000;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) sum += draw_precision(201, 2.0, rng);
  CHECK(sum / draws == doctest::Approx(100.0).epsilon(0.02));

  double sum_half = 0.0;
  for (int i = 0; i < draws; ++i) sum_half += draw_precision(201, 4.0, rng);
  CHECK(sum_half / draws == doctest::Approx(50.0).epsilon(0.03));

  // better fit -> stochastically smaller noise
  std::vector<double> tight(1000), loose(1000);
  for (int i = 0; i < 1000; ++i) tight[i] = 1.0 / draw_precision(101, 0.1, rng);
  for (int i = 0; i < 1000; ++i) loose[i] = 1.0 / draw_precision(101, 10.0, rng);
  std::nth_element(tight.begin(), tight.begin() + 500, tight.end());
  std::nth_element(loose.begin(), loose.begin() + 500, loose.end());
  CHECK(tight[500] < loose[500]);
}

TEST_CASE("sample_sigmas stays positive and finite") {
  Rng rng(29);
  ClusterState state = two_sphere_state(8.0, 0.25, 60, rng);
  for (int round = 0; round < 5; ++round) {
    sample_sigmas(state, rng);
    for (const auto& c : state.components) {
      REQUIRE(c.sigma2 > 0.0);
      REQUIRE(std::isfinite(c.sigma2));
    }
  }
  // tiny clusters go through the clamped-shape path
  ClusterState tiny;
  tiny.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  tiny.labels = {0, 1};
  tiny.components = {{unit_sphere(), 1.0}, {unit_sphere(), 1.0}};
  tiny.counts = {1, 1};
  sample_sigmas(tiny, rng);
  for (const auto& c : tiny.components) REQUIRE(std::isfinite(c.sigma2));
}

TEST_CASE("split_pass is a no-op on well-fit states") {
  Rng rng(31);
  const auto params = unit_sphere();
  ClusterState state;
  state.points = gstm_samples({params, 0.0}, 100, rng);
  state.labels.assign(100, 0);
  state.components = {{params, 0.01}};
  state.counts = {100};
  SamplerConfig config;
  CHECK_FALSE(split_pass(state, config, rng));
  CHECK(state.cluster_count() == 1);

  config.split_enabled = false;
  CHECK_FALSE(split_pass(state, config, rng));
}

TEST_CASE("split_pass separates two disjoint spheres under one component") {
  Rng rng(37);
  ClusterState state = two_sphere_state(10.0, 1e-4, 100, rng);
  SamplerConfig config;
  const int k_before = state.cluster_count();
  REQUIRE(split_pass(state, config, rng));
  CHECK(state.cluster_count() == k_before + 1);
  CHECK(state.consistent());
  // the halves separate the spheres exactly
  for (int i = 1; i < 100; ++i) REQUIRE(state.labels[i] == state.labels[0]);
  for (int i = 101; i < 200; ++i) REQUIRE(state.labels[i] == state.labels[100]);
  REQUIRE(state.labels[0] != state.labels[100]);
}

TEST_CASE("run_abstraction collapses a single primitive to one component") {
  Rng rng(41);
  SuperquadricParams truth;
  truth.eps1 = 0.7;
  truth.eps2 = 1.1;
  truth.ax = 1.0;
  truth.ay = 0.6;
  truth.az = 0.4;
  truth.kx = 0.25;
  const double sigma = 0.01;
  const Points pts = gstm_samples({truth, sigma * sigma}, 700, rng);

  SamplerConfig config;
  config.k_init = 6;
  config.iterations = 8;
  config.seed = 7;
  const AbstractionResult result = run_abstraction(pts, config);

  CHECK(result.components.size() == 1);
  CHECK(result.trace.size() == 8);
  for (const auto& t : result.trace) {
    REQUIRE(std::isfinite(t.total_sq_distance));
    REQUIRE(t.k >= 1);
  }
  CHECK(result.trace.back().total_sq_distance < result.trace.front().total_sq_distance);
  const double rms = std::sqrt(
      sum_squared_radial(result.components[0].theta, pts) / pts.size());
  CHECK(rms <= 3.0 * sigma);
}

TEST_CASE("run_abstraction is deterministic given the seed") {
  Rng rng(43);
  const Points pts = gstm_samples({unit_sphere(), 1e-4}, 300, rng);
  SamplerConfig config;
  config.k_init = 4;
  config.iterations = 4;
  config.seed = 99;
  const AbstractionResult a = run_abstraction(pts, config);
  const AbstractionResult b = run_abstraction(pts, config);
  REQUIRE(a.labels == b.labels);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    REQUIRE(a.trace[i].k == b.trace[i].k);
    REQUIRE(a.trace[i].total_sq_distance == b.trace[i].total_sq_distance);
  }
  for (std::size_t j = 0; j < a.components.size(); ++j) {
    REQUIRE(a.components[j].sigma2 == b.components[j].sigma2);
    REQUIRE(a.components[j].theta.translation == b.components[j].theta.translation);
  }
}

TEST_CASE("run_abstraction rejects undersized input") {
  const Points tiny(5, Vec3(0, 0, 0));
  CHECK_THROWS_AS(run_abstraction(tiny, SamplerConfig{}), DegenerateInput);
}
