#pragma once

#include <utility>

#include "sqabs/fitting.hpp"
#include "sqabs/inference.hpp"

namespace sqabs {

struct MergeDecision {
  std::pair<int, int> pair{-1, -1};
  SuperquadricParams merged_theta;
  double merged_ssd = 0.0;
  bool accepted = false;
};

// Refit the union of two clusters and accept when the merged mean squared
// radial distance stays within `lambda` times the pooled pre-merge mean.
MergeDecision try_merge(const ClusterState& state, int i, int j, double lambda,
                        const FitOptions& options);

// Greedy best-first merging over centroid-sorted candidate pairs whose
// 3-sigma-inflated bounding boxes overlap; repeats until no pair is
// accepted. The surviving cluster gets a fresh noise draw.
void merge_pass(ClusterState& state, double lambda, const FitOptions& options,
                Rng& rng);

}  // namespace sqabs
