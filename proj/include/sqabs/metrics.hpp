#pragma once

#include <cstdint>
#include <vector>

#include "sqabs/geometry.hpp"
#include "sqabs/inference.hpp"

namespace sqabs {

struct OccupancyGrid {
  Eigen::Vector3i resolution = Eigen::Vector3i::Zero();  // cells per axis
  Vec3 origin = Vec3::Zero();                            // min corner
  Vec3 cell_size = Vec3::Zero();
  std::vector<std::uint8_t> occupancy;  // x fastest, then y, then z

  static OccupancyGrid make(const Vec3& lo, const Vec3& hi, const Eigen::Vector3i& res);
  // Frame over the (inflated) point bounding box; cells holding at least
  // one point are occupied.
  static OccupancyGrid from_points(const Points& points, int res = 32,
                                   double inflate = 0.05);

  std::size_t index(int ix, int iy, int iz) const;
  Vec3 cell_center(int ix, int iy, int iz) const;
  std::size_t occupied_count() const;
  bool same_frame(const OccupancyGrid& other, double tol = 1e-9) const;
};

// Fill the interior of a closed occupied shell: every cell not reachable
// from the grid boundary through free cells becomes occupied.
OccupancyGrid solidified(const OccupancyGrid& shell);

// Volume occupancy estimated from a surface-sampled cloud by morphological
// closing: dilate each point by one cell diagonal, fill the enclosed
// interior, erode the dilation back. Comparable against rasterized solids.
OccupancyGrid occupancy_from_cloud(const Points& points, int res = 32,
                                   double inflate = 0.05);

// A point is inside the abstraction when any component's inside-outside
// value at the canonical pullback is <= 1.
bool inside_abstraction(const std::vector<GstmComponent>& components, const Vec3& x);

// Occupancy of the components rasterized onto the frame of `frame`
// (cell-center containment test).
OccupancyGrid rasterize_components(const std::vector<GstmComponent>& components,
                                   const OccupancyGrid& frame);

double iou_grids(const OccupancyGrid& a, const OccupancyGrid& b);

// Volumetric IoU of the abstraction against a ground-truth occupancy grid;
// the abstraction is rasterized onto the ground truth's frame.
double iou(const AbstractionResult& result, const OccupancyGrid& ground_truth);

// Area-weighted surface samples pooled across all components.
Points abstraction_surface_samples(const AbstractionResult& result, int n, Rng& rng);

// Symmetric mean nearest-neighbor distance between abstraction surface
// samples and the ground-truth points, both mapped into the unit cube of
// the ground truth's bounding box (uniform scale by the longest edge).
// Returns +infinity for an empty abstraction.
double chamfer_l1(const AbstractionResult& result, const Points& ground_truth,
                  int n_samples, Rng& rng);

// Final per-point labels re-indexed densely, largest cluster first.
std::vector<int> segmentation_labels(const AbstractionResult& result);

}  // namespace sqabs
