#include <doctest.h>

#include <cmath>
#include <limits>

#include "sqabs/metrics.hpp"
#include "support.hpp"

using namespace sqabs;
using test_support::unit_sphere;

namespace {

AbstractionResult single_component_result(const SuperquadricParams& p, int count) {
  AbstractionResult r;
  r.components.push_back({p, 1e-6});
  r.labels.assign(count, 0);
  return r;
}

double mean_self_spacing(const Points& pts) {
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      best = std::min(best, (pts[i] - pts[j]).norm());
    }
    total += best;
  }
  return total / pts.size();
}

}  // namespace

TEST_CASE("chamfer of a shape against its own samples stays at the sampling floor") {
  Rng rng(3);
  SuperquadricParams truth;
  truth.eps1 = 0.8;
  truth.eps2 = 1.2;
  truth.ax = 1.0;
  truth.ay = 0.7;
  truth.az = 0.5;
  const Points gt = sample_surface(truth, 2000, rng);
  const AbstractionResult result = single_component_result(truth, 2000);
  const double value = chamfer_l1(result, gt, 2000, rng);

  // normalize the gt self-spacing the same way chamfer does
  const auto [lo, hi] = bounding_box(gt);
  const double floor = mean_self_spacing(gt) / (hi - lo).maxCoeff();
  CHECK(value >= 0.0);
  CHECK(value <= 2.0 * floor);
}

TEST_CASE("chamfer grows at least linearly when a thin shape is shifted") {
  Rng rng(5);
  SuperquadricParams slab;
  slab.eps1 = 0.1;
  slab.eps2 = 0.1;
  slab.ax = 1.0;
  slab.ay = 1.0;
  slab.az = 0.02;  // plane-like
  const Points gt = sample_surface(slab, 3000, rng);
  const auto [lo, hi] = bounding_box(gt);
  const double scale = 1.0 / (hi - lo).maxCoeff();

  SuperquadricParams moved = slab;
  const double shift_world = 0.1;
  moved.translation.z() += shift_world;
  const double delta = shift_world * scale;

  const double value = chamfer_l1(single_component_result(moved, 1), gt, 3000, rng);
  CHECK(value >= delta / 2.0);
}

TEST_CASE("chamfer is stable under sample-count doubling") {
  Rng rng(7);
  SuperquadricParams truth;
  truth.ax = 1.0;
  truth.ay = 0.8;
  truth.az = 0.6;
  truth.kx = 0.3;
  const Points gt = sample_surface(truth, 6000, rng);
  // a scene with a real discrepancy, so the value measures structure
  // rather than its own sampling floor
  SuperquadricParams off = truth;
  off.ax = 1.3;
  off.translation.z() += 0.1;
  const AbstractionResult result = single_component_result(off, 1);
  Rng r1(11), r2(11);
  const double v1 = chamfer_l1(result, gt, 5000, r1);
  const double v2 = chamfer_l1(result, gt, 10000, r2);
  CHECK(std::abs(v1 - v2) <= 0.05 * std::max(v1, v2));
}

TEST_CASE("chamfer of an empty abstraction is an infinite sentinel") {
  Rng rng(9);
  AbstractionResult empty;
  const Points gt = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  CHECK(std::isinf(chamfer_l1(empty, gt, 100, rng)));
}

TEST_CASE("iou of identical occupancies is one, of disjoint ones zero") {
  const auto frame =
      OccupancyGrid::make(Vec3(-1.5, -1.5, -1.5), Vec3(1.5, 1.5, 1.5), Eigen::Vector3i(24, 24, 24));
  const AbstractionResult sphere = single_component_result(unit_sphere(), 1);
  const OccupancyGrid a = rasterize_components(sphere.components, frame);
  CHECK(iou(sphere, a) == 1.0);

  SuperquadricParams far = unit_sphere();
  far.translation = Vec3(100, 0, 0);
  OccupancyGrid b = frame;
  std::fill(b.occupancy.begin(), b.occupancy.end(), 0);
  const AbstractionResult far_result = single_component_result(far, 1);
  CHECK(iou(far_result, a) == 0.0);
  CHECK(iou_grids(b, b) == 0.0);  // empty union is defined as 0
  CHECK(iou_grids(a, b) == iou_grids(b, a));
}

TEST_CASE("nested spheres overlap by the volume ratio") {
  const auto frame =
      OccupancyGrid::make(Vec3::Constant(-1.05), Vec3::Constant(1.05), Eigen::Vector3i(64, 64, 64));
  SuperquadricParams small = unit_sphere();
  small.ax = small.ay = small.az = 0.5;
  const OccupancyGrid gt = rasterize_components({{unit_sphere(), 1.0}}, frame);
  const double value = iou(single_component_result(small, 1), gt);
  CHECK(value == doctest::Approx(0.125).epsilon(0.16));  // 0.125 +- 0.02
}

TEST_CASE("rasterization agrees with the implicit inside test on cell centers") {
  Rng rng(13);
  const auto frame =
      OccupancyGrid::make(Vec3(-2, -2, -2), Vec3(2, 2, 2), Eigen::Vector3i(16, 16, 16));
  const auto params = test_support::random_params(rng);
  const std::vector<GstmComponent> comps = {{params, 1.0}};
  const OccupancyGrid g = rasterize_components(comps, frame);
  std::uniform_int_distribution<int> pick(0, 15);
  for (int i = 0; i < 200; ++i) {
    const int ix = pick(rng), iy = pick(rng), iz = pick(rng);
    const Vec3 c = g.cell_center(ix, iy, iz);
    const auto canonical = to_canonical(params, c);
    const bool inside = canonical && implicit_value(params, *canonical) <= 1.0;
    REQUIRE((g.occupancy[g.index(ix, iy, iz)] != 0) == inside);
  }
}

TEST_CASE("solidified fills the interior of a closed shell") {
  OccupancyGrid box = OccupancyGrid::make(Vec3(-1, -1, -1), Vec3(1, 1, 1),
                                          Eigen::Vector3i(12, 12, 12));
  // hollow 8x8x8 cube shell occupying cells [2,9] on each axis
  for (int z = 2; z <= 9; ++z)
    for (int y = 2; y <= 9; ++y)
      for (int x = 2; x <= 9; ++x)
        if (x == 2 || x == 9 || y == 2 || y == 9 || z == 2 || z == 9)
          box.occupancy[box.index(x, y, z)] = 1;
  const std::size_t shell_cells = box.occupied_count();
  const OccupancyGrid solid = solidified(box);
  CHECK(solid.occupied_count() == shell_cells + 6 * 6 * 6);

  // an isolated occupied cell floods nothing
  OccupancyGrid lone = OccupancyGrid::make(Vec3(-1, -1, -1), Vec3(1, 1, 1),
                                           Eigen::Vector3i(8, 8, 8));
  lone.occupancy[lone.index(4, 4, 4)] = 1;
  CHECK(solidified(lone).occupied_count() == 1);
}

TEST_CASE("occupancy_from_cloud approximates the sampled solid") {
  Rng rng(17);
  const Points shell_pts = sample_surface(unit_sphere(), 4000, rng);
  const OccupancyGrid estimated = occupancy_from_cloud(shell_pts, 32);
  const OccupancyGrid truth =
      rasterize_components({{unit_sphere(), 1.0}}, estimated);
  CHECK(iou_grids(estimated, truth) >= 0.8);
}

TEST_CASE("occupancy from points marks the containing cells") {
  const Points pts = {Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(-1, -1, -1)};
  const OccupancyGrid g = OccupancyGrid::from_points(pts, 8);
  CHECK(g.occupied_count() >= 1);
  CHECK(g.occupied_count() <= 3);
  CHECK_THROWS(OccupancyGrid::from_points({}, 8));
}

TEST_CASE("segmentation labels are dense and size-ordered") {
  AbstractionResult r;
  r.components = {{unit_sphere(), 1.0}, {unit_sphere(), 1.0}, {unit_sphere(), 1.0}};
  r.labels = {2, 2, 2, 0, 0, 1};  // cluster 2 largest, then 0, then 1
  const auto seg = segmentation_labels(r);
  CHECK(seg == std::vector<int>{0, 0, 0, 1, 1, 2});

  AbstractionResult single = single_component_result(unit_sphere(), 4);
  const auto all_zero = segmentation_labels(single);
  CHECK(all_zero == std::vector<int>{0, 0, 0, 0});

  // histogram is preserved under re-indexing
  std::vector<int> hist(3, 0);
  for (int z : seg) ++hist[z];
  CHECK(hist == std::vector<int>{3, 2, 1});
}
