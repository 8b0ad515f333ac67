#include "sqabs/merging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>

namespace sqabs {

namespace {

struct ClusterInfo {
  Points members;
  Vec3 centroid;
  Vec3 lo, hi;  // bbox inflated by 3 sigma
  double sum_sq = 0.0;
  std::uint64_t uid = 0;
};

ClusterInfo make_info(const ClusterState& state, int j, std::uint64_t uid) {
  ClusterInfo info;
  info.members = state.member_points(j);
  info.centroid = Vec3::Zero();
  for (const Vec3& p : info.members) info.centroid += p;
  info.centroid /= static_cast<double>(info.members.size());
  auto [lo, hi] = bounding_box(info.members);
  const double pad = 3.0 * std::sqrt(std::max(state.components[j].sigma2, 0.0));
  info.lo = lo.array() - pad;
  info.hi = hi.array() + pad;
  info.sum_sq = sum_squared_radial(state.components[j].theta, info.members);
  info.uid = uid;
  return info;
}

bool boxes_overlap(const ClusterInfo& a, const ClusterInfo& b) {
  return (a.lo.array() <= b.hi.array()).all() && (b.lo.array() <= a.hi.array()).all();
}

}  // namespace

MergeDecision try_merge(const ClusterState& state, int i, int j, double lambda,
                        const FitOptions& options) {
  MergeDecision decision;
  decision.pair = {i, j};

  Points union_points = state.member_points(i);
  const Points other = state.member_points(j);
  union_points.insert(union_points.end(), other.begin(), other.end());
  const double n = static_cast<double>(union_points.size());

  const double pooled_mean =
      (sum_squared_radial(state.components[i].theta, state.member_points(i)) +
       sum_squared_radial(state.components[j].theta, other)) /
      n;

  FitReport fit;
  try {
    fit = fit_superquadric(union_points, moi_ellipsoid(union_points), options);
  } catch (const std::exception&) {
    return decision;  // fit failure: not accepted
  }
  decision.merged_theta = fit.theta;
  decision.merged_ssd = fit.final_ssd;
  if (!std::isfinite(fit.final_ssd)) return decision;

  // Absolute slack so exact unions (pooled error ~ 0) still merge.
  const double slack = std::pow(1e-6 * bbox_diagonal(union_points), 2);
  decision.accepted = decision.merged_ssd / n <= lambda * pooled_mean + slack;
  return decision;
}

void merge_pass(ClusterState& state, double lambda, const FitOptions& options,
                Rng& rng) {
  std::uint64_t next_uid = 0;
  std::vector<ClusterInfo> infos;
  infos.reserve(state.cluster_count());
  for (int j = 0; j < state.cluster_count(); ++j)
    infos.push_back(make_info(state, j, next_uid++));

  std::map<std::pair<std::uint64_t, std::uint64_t>, MergeDecision> cache;

  while (state.cluster_count() > 1) {
    struct Candidate {
      int i, j;
      double centroid_dist;
    };
    std::vector<Candidate> candidates;
    for (int i = 0; i < state.cluster_count(); ++i)
      for (int j = i + 1; j < state.cluster_count(); ++j)
        if (boxes_overlap(infos[i], infos[j]))
          candidates.push_back({i, j, (infos[i].centroid - infos[j].centroid).norm()});
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.centroid_dist != b.centroid_dist) return a.centroid_dist < b.centroid_dist;
      return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });

    int best_i = -1, best_j = -1;
    double best_mean = std::numeric_limits<double>::infinity();
    MergeDecision best_decision;
    for (const Candidate& c : candidates) {
      const auto key = std::minmax(infos[c.i].uid, infos[c.j].uid);
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache.emplace(key, try_merge(state, c.i, c.j, lambda, options)).first;
      const MergeDecision& d = it->second;
      if (!d.accepted) continue;
      const double n = static_cast<double>(state.counts[c.i] + state.counts[c.j]);
      const double mean = d.merged_ssd / n;
      if (mean < best_mean) {
        best_mean = mean;
        best_i = c.i;
        best_j = c.j;
        best_decision = d;
      }
    }
    if (best_i < 0) break;

    const int keep = best_i;
    const int drop = best_j;
    state.components[keep].theta = best_decision.merged_theta;
    state.counts[keep] += state.counts[drop];
    state.components.erase(state.components.begin() + drop);
    state.counts.erase(state.counts.begin() + drop);
    for (int& z : state.labels) {
      if (z == drop)
        z = keep;
      else if (z > drop)
        --z;
    }
    const Points merged_members = state.member_points(keep);
    state.components[keep].sigma2 =
        1.0 / draw_precision(state.counts[keep],
                             sum_squared_radial(state.components[keep].theta, merged_members),
                             rng);

    infos.erase(infos.begin() + drop);
    infos[keep] = make_info(state, keep, next_uid++);
  }
}

}  // namespace sqabs
