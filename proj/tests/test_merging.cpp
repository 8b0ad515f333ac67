#include <doctest.h>

#include <cmath>
#include <numeric>

#include "sqabs/merging.hpp"
#include "support.hpp"

using namespace sqabs;
using test_support::unit_sphere;

namespace {

// One primitive's samples split into k slices by k-means.
ClusterState oversegmented_state(const SuperquadricParams& truth, double sigma,
                                 int n, int k, Rng& rng) {
  ClusterState state;
  state.points = gstm_samples({truth, sigma * sigma}, n, rng);
  state.labels = kmeans_init(state.points, k, rng);
  state.counts.assign(k, 0);
  for (int z : state.labels) ++state.counts[z];
  for (int j = 0; j < k; ++j) {
    const Points members = state.member_points(j);
    FitOptions opts;
    const FitReport fit = fit_superquadric(members, moi_ellipsoid(members), opts);
    state.components.push_back(
        {fit.theta, std::max(fit.final_ssd / members.size(), 1e-10)});
  }
  state.remove_empty_clusters();
  return state;
}

}  // namespace

TEST_CASE("try_merge reunites two halves of one primitive") {
  Rng rng(3);
  SuperquadricParams truth;
  truth.eps1 = 0.6;
  truth.eps2 = 1.2;
  truth.ax = 1.0;
  truth.ay = 0.7;
  truth.az = 0.4;
  truth.kx = 0.2;
  const double sigma = 0.01;
  ClusterState state = oversegmented_state(truth, sigma, 1200, 2, rng);
  REQUIRE(state.cluster_count() == 2);

  const MergeDecision decision = try_merge(state, 0, 1, 2.0, {});
  CHECK(decision.accepted);
  const double rms = std::sqrt(decision.merged_ssd / state.points.size());
  CHECK(rms <= 2.0 * sigma);
}

TEST_CASE("try_merge rejects the union of two far-apart spheres") {
  Rng rng(5);
  GstmComponent a{unit_sphere(), 1e-4};
  GstmComponent b{unit_sphere(), 1e-4};
  b.theta.translation = Vec3(10, 0, 0);

  ClusterState state;
  const Points pa = gstm_samples(a, 300, rng);
  const Points pb = gstm_samples(b, 300, rng);
  state.points = pa;
  state.points.insert(state.points.end(), pb.begin(), pb.end());
  state.labels.assign(300, 0);
  state.labels.resize(600, 1);
  state.components = {a, b};
  state.counts = {300, 300};

  const MergeDecision decision = try_merge(state, 0, 1, 2.0, {});
  CHECK_FALSE(decision.accepted);
}

TEST_CASE("try_merge accepts identical zero-error clusters at lambda 1") {
  Rng rng(7);
  const auto sphere = unit_sphere();
  ClusterState state;
  const Points pa = sample_surface(sphere, 200, rng);
  const Points pb = sample_surface(sphere, 200, rng);
  state.points = pa;
  state.points.insert(state.points.end(), pb.begin(), pb.end());
  state.labels.assign(200, 0);
  state.labels.resize(400, 1);
  state.components = {{sphere, 1e-6}, {sphere, 1e-6}};
  state.counts = {200, 200};

  CHECK(try_merge(state, 0, 1, 1.0, {}).accepted);
}

TEST_CASE("merge_pass leaves a single cluster untouched") {
  Rng rng(9);
  const auto sphere = unit_sphere();
  ClusterState state;
  state.points = gstm_samples({sphere, 1e-4}, 150, rng);
  state.labels.assign(150, 0);
  state.components = {{sphere, 1e-4}};
  state.counts = {150};

  merge_pass(state, 2.0, {}, rng);
  CHECK(state.cluster_count() == 1);
  CHECK(state.consistent());
}

TEST_CASE("merge_pass collapses an over-segmented primitive") {
  Rng rng(11);
  SuperquadricParams truth;
  truth.eps1 = 0.9;
  truth.eps2 = 1.0;
  truth.ax = 1.0;
  truth.ay = 0.8;
  truth.az = 0.5;
  ClusterState state = oversegmented_state(truth, 0.01, 1500, 5, rng);
  const int n_before = static_cast<int>(state.points.size());

  merge_pass(state, 2.0, {}, rng);
  CHECK(state.cluster_count() == 1);
  CHECK(state.consistent());
  CHECK(std::accumulate(state.counts.begin(), state.counts.end(), 0) == n_before);
}

TEST_CASE("merge_pass keeps separated primitives apart") {
  Rng rng(13);
  GstmComponent a{unit_sphere(), 1e-4};
  GstmComponent b{unit_sphere(), 1e-4};
  b.theta.translation = Vec3(10, 0, 0);

  ClusterState state;
  const Points pa = gstm_samples(a, 250, rng);
  const Points pb = gstm_samples(b, 250, rng);
  state.points = pa;
  state.points.insert(state.points.end(), pb.begin(), pb.end());
  state.labels.assign(250, 0);
  state.labels.resize(500, 1);
  state.components = {a, b};
  state.counts = {250, 250};

  merge_pass(state, 2.0, {}, rng);
  CHECK(state.cluster_count() == 2);
  CHECK(state.consistent());
}

TEST_CASE("merge_pass with tiny lambda never merges noisy clusters") {
  Rng rng(17);
  SuperquadricParams truth = unit_sphere();
  ClusterState state = oversegmented_state(truth, 0.02, 600, 3, rng);
  const int k_before = state.cluster_count();
  merge_pass(state, 1e-6, {}, rng);
  // a strictly-worse union cannot pass a sub-unity threshold
  CHECK(state.cluster_count() == k_before);
}

TEST_CASE("merge_pass with huge lambda still terminates at a valid partition") {
  Rng rng(19);
  SuperquadricParams truth = unit_sphere();
  ClusterState state = oversegmented_state(truth, 0.02, 600, 4, rng);
  merge_pass(state, 1e9, {}, rng);
  CHECK(state.cluster_count() >= 1);
  CHECK(state.cluster_count() <= 4);
  CHECK(state.consistent());
}
