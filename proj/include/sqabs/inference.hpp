#pragma once

#include <cstdint>
#include <vector>

#include "sqabs/geometry.hpp"

namespace sqabs {

// One mixture component: a tapered superquadric plus the variance of the
// radial noise around its surface.
struct GstmComponent {
  SuperquadricParams theta;
  double sigma2 = 1.0;
};

// Point cloud with its current partition. Labels index into `components`;
// `counts` mirrors the label histogram.
struct ClusterState {
  Points points;
  std::vector<int> labels;
  std::vector<GstmComponent> components;
  std::vector<int> counts;

  int cluster_count() const { return static_cast<int>(components.size()); }
  Points member_points(int j) const;
  void remove_empty_clusters();
  // counts match the label histogram and sum to the point count.
  bool consistent() const;
};

struct SamplerConfig {
  double alpha = 0.5;
  double p0 = 0.1;
  int iterations = 30;
  int k_init = 30;
  std::uint64_t seed = 0;
  int min_cluster_for_fit = 10;
  bool split_enabled = true;
  double merge_lambda = 2.0;
  double sentinel_distance = kSentinelDistance;
};

struct TraceEntry {
  int k = 0;
  double total_sq_distance = 0.0;
};

struct AbstractionResult {
  std::vector<GstmComponent> components;
  std::vector<int> labels;
  // State at the start of each sweep: live cluster count and the summed
  // squared radial distance of all points to their assigned primitives.
  std::vector<TraceEntry> trace;
};

// Draw from the generative model: a surface point pushed radially by
// Gaussian noise, then tapered and posed.
Vec3 gstm_sample(const GstmComponent& component, Rng& rng);
Points gstm_samples(const GstmComponent& component, int n, Rng& rng);

// log p(x | theta, sigma^2) via the radial-distance approximation of the
// sampling density. Always finite.
double point_log_density(const Vec3& x, const GstmComponent& component,
                         double sentinel = kSentinelDistance);

// k-means++ seeding followed by Lloyd iterations (at most 100, or until the
// largest centroid shift drops below 1e-6). Throws DegenerateInput when
// there are fewer points than clusters.
std::vector<int> kmeans_init(const Points& points, int k, Rng& rng);

// Ellipsoid whose solid moment of inertia is one quarter of the point
// set's, posed along the principal axes of the set.
SuperquadricParams moi_ellipsoid(const Points& points);

// Normalized assignment probabilities for one point: one entry per current
// component (population times likelihood) plus a final new-cluster entry
// (alpha times p0). `counts_excl` excludes the point being reassigned.
std::vector<double> assignment_probabilities(const Vec3& x,
                                             const std::vector<GstmComponent>& components,
                                             const std::vector<int>& counts_excl,
                                             const SamplerConfig& config);

// One full sequential sweep of membership draws; empty clusters are removed
// afterwards. New clusters open immediately and can attract later points in
// the same sweep.
void sample_assignments(ClusterState& state, const SamplerConfig& config, Rng& rng);

// Per-cluster noise-precision draw given the summed squared distance.
double draw_precision(int n, double sum_sq_distance, Rng& rng);
void sample_sigmas(ClusterState& state, Rng& rng,
                   double sentinel = kSentinelDistance);

// Split the worst-fitting cluster (largest mean squared residual) in two
// when its residual exceeds 4x its noise variance. At most one split per
// call; returns whether a split happened.
bool split_pass(ClusterState& state, const SamplerConfig& config, Rng& rng);

double total_squared_distance(const ClusterState& state,
                              double sentinel = kSentinelDistance);

// Full pipeline: k-means + MoI initialization, `iterations` sweeps of
// (split, assignments, per-cluster refit, noise redraw), then the merging
// pass. Deterministic given the config seed.
AbstractionResult run_abstraction(const Points& points, const SamplerConfig& config);

}  // namespace sqabs
