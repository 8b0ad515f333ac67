#include "sqabs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sqabs/errors.hpp"

namespace sqabs {

OccupancyGrid OccupancyGrid::make(const Vec3& lo, const Vec3& hi,
                                  const Eigen::Vector3i& res) {
  if ((res.array() < 2).any()) throw std::invalid_argument("grid resolution must be >= 2");
  if (((hi - lo).array() <= 0.0).any())
    throw std::invalid_argument("grid bounds must have positive extent");
  OccupancyGrid g;
  g.resolution = res;
  g.origin = lo;
  g.cell_size = (hi - lo).array() / res.cast<double>().array();
  g.occupancy.assign(static_cast<std::size_t>(res.x()) * res.y() * res.z(), 0);
  return g;
}

OccupancyGrid OccupancyGrid::from_points(const Points& points, int res, double inflate) {
  if (points.empty()) throw DegenerateInput("occupancy grid: empty point set");
  auto [lo, hi] = bounding_box(points);
  const Vec3 pad = ((hi - lo) * inflate).cwiseMax(1e-9);
  lo -= pad;
  hi += pad;
  OccupancyGrid g = make(lo, hi, Eigen::Vector3i::Constant(res));
  for (const Vec3& p : points) {
    Eigen::Vector3i c;
    for (int a = 0; a < 3; ++a) {
      const int i = static_cast<int>(std::floor((p[a] - g.origin[a]) / g.cell_size[a]));
      c[a] = std::clamp(i, 0, g.resolution[a] - 1);
    }
    g.occupancy[g.index(c.x(), c.y(), c.z())] = 1;
  }
  return g;
}

std::size_t OccupancyGrid::index(int ix, int iy, int iz) const {
  return static_cast<std::size_t>(iz) * resolution.x() * resolution.y() +
         static_cast<std::size_t>(iy) * resolution.x() + ix;
}

Vec3 OccupancyGrid::cell_center(int ix, int iy, int iz) const {
  return origin + Vec3((ix + 0.5) * cell_size.x(), (iy + 0.5) * cell_size.y(),
                       (iz + 0.5) * cell_size.z());
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(
      std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

bool OccupancyGrid::same_frame(const OccupancyGrid& other, double tol) const {
  return resolution == other.resolution && (origin - other.origin).norm() <= tol &&
         (cell_size - other.cell_size).norm() <= tol;
}

OccupancyGrid solidified(const OccupancyGrid& shell) {
  OccupancyGrid g = shell;
  const int nx = g.resolution.x(), ny = g.resolution.y(), nz = g.resolution.z();
  std::vector<std::uint8_t> outside(g.occupancy.size(), 0);
  std::vector<Eigen::Vector3i> stack;
  auto push_if_free = [&](int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) return;
    const std::size_t idx = g.index(x, y, z);
    if (outside[idx] || g.occupancy[idx]) return;
    outside[idx] = 1;
    stack.push_back({x, y, z});
  };
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        if (x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1)
          push_if_free(x, y, z);
  while (!stack.empty()) {
    const Eigen::Vector3i c = stack.back();
    stack.pop_back();
    push_if_free(c.x() + 1, c.y(), c.z());
    push_if_free(c.x() - 1, c.y(), c.z());
    push_if_free(c.x(), c.y() + 1, c.z());
    push_if_free(c.x(), c.y() - 1, c.z());
    push_if_free(c.x(), c.y(), c.z() + 1);
    push_if_free(c.x(), c.y(), c.z() - 1);
  }
  for (std::size_t i = 0; i < g.occupancy.size(); ++i)
    if (!outside[i]) g.occupancy[i] = 1;
  return g;
}

OccupancyGrid occupancy_from_cloud(const Points& points, int res, double inflate) {
  if (points.empty()) throw DegenerateInput("occupancy grid: empty point set");
  auto [lo, hi] = bounding_box(points);
  const Vec3 pad = ((hi - lo) * inflate).cwiseMax(1e-9);
  OccupancyGrid g = OccupancyGrid::make(lo - pad, hi + pad, Eigen::Vector3i::Constant(res));

  const double radius = g.cell_size.norm();
  for (const Vec3& p : points) {
    Eigen::Vector3i a, b;
    for (int axis = 0; axis < 3; ++axis) {
      a[axis] = std::clamp(
          static_cast<int>(std::floor((p[axis] - radius - g.origin[axis]) / g.cell_size[axis])),
          0, g.resolution[axis] - 1);
      b[axis] = std::clamp(
          static_cast<int>(std::floor((p[axis] + radius - g.origin[axis]) / g.cell_size[axis])),
          0, g.resolution[axis] - 1);
    }
    for (int iz = a.z(); iz <= b.z(); ++iz)
      for (int iy = a.y(); iy <= b.y(); ++iy)
        for (int ix = a.x(); ix <= b.x(); ++ix)
          if ((g.cell_center(ix, iy, iz) - p).norm() <= radius)
            g.occupancy[g.index(ix, iy, iz)] = 1;
  }

  g = solidified(g);

  // erode with the same euclidean ball that dilated the points
  Eigen::Vector3i reach;
  for (int axis = 0; axis < 3; ++axis)
    reach[axis] = static_cast<int>(std::ceil(radius / g.cell_size[axis]));
  OccupancyGrid eroded = g;
  for (int iz = 0; iz < res; ++iz)
    for (int iy = 0; iy < res; ++iy)
      for (int ix = 0; ix < res; ++ix) {
        const std::size_t idx = g.index(ix, iy, iz);
        if (!g.occupancy[idx]) continue;
        bool keep = true;
        for (int dz = -reach.z(); keep && dz <= reach.z(); ++dz)
          for (int dy = -reach.y(); keep && dy <= reach.y(); ++dy)
            for (int dx = -reach.x(); keep && dx <= reach.x(); ++dx) {
              if (dx == 0 && dy == 0 && dz == 0) continue;
              const Vec3 offset(dx * g.cell_size.x(), dy * g.cell_size.y(),
                                dz * g.cell_size.z());
              if (offset.norm() > radius) continue;
              const int x = ix + dx, y = iy + dy, z = iz + dz;
              // out-of-range neighbors count as free
              if (x < 0 || y < 0 || z < 0 || x >= res || y >= res || z >= res ||
                  g.occupancy[g.index(x, y, z)] == 0)
                keep = false;
            }
        if (!keep) eroded.occupancy[idx] = 0;
      }
  return eroded;
}

bool inside_abstraction(const std::vector<GstmComponent>& components, const Vec3& x) {
  for (const auto& c : components) {
    const auto canonical = to_canonical(c.theta, x);
    if (!canonical) continue;  // degenerate taper: not inside this component
    if (implicit_value(c.theta, *canonical) <= 1.0) return true;
  }
  return false;
}

OccupancyGrid rasterize_components(const std::vector<GstmComponent>& components,
                                   const OccupancyGrid& frame) {
  OccupancyGrid g = frame;
  std::fill(g.occupancy.begin(), g.occupancy.end(), 0);
  for (int iz = 0; iz < g.resolution.z(); ++iz)
    for (int iy = 0; iy < g.resolution.y(); ++iy)
      for (int ix = 0; ix < g.resolution.x(); ++ix)
        if (inside_abstraction(components, g.cell_center(ix, iy, iz)))
          g.occupancy[g.index(ix, iy, iz)] = 1;
  return g;
}

double iou_grids(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (!a.same_frame(b)) throw std::invalid_argument("iou: grids must share a frame");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.occupancy.size(); ++i) {
    const bool oa = a.occupancy[i] != 0;
    const bool ob = b.occupancy[i] != 0;
    inter += oa && ob;
    uni += oa || ob;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const AbstractionResult& result, const OccupancyGrid& ground_truth) {
  return iou_grids(rasterize_components(result.components, ground_truth), ground_truth);
}

Points abstraction_surface_samples(const AbstractionResult& result, int n, Rng& rng) {
  const std::size_t k = result.components.size();
  std::vector<double> area(k, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    area[j] = mesh(result.components[j].theta, 32).area();
    total += area[j];
  }
  std::vector<int> quota(k, 0);
  if (total <= 0.0) {
    for (std::size_t j = 0; j < k; ++j) quota[j] = n / static_cast<int>(k);
  } else {
    for (std::size_t j = 0; j < k; ++j)
      quota[j] = static_cast<int>(std::floor(n * area[j] / total));
  }
  // hand out the rounding remainder by largest fractional share
  int assigned = std::accumulate(quota.begin(), quota.end(), 0);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = total > 0.0 ? n * area[a] / total - quota[a] : 0.0;
    const double fb = total > 0.0 ? n * area[b] / total - quota[b] : 0.0;
    return fa > fb;
  });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++quota[order[r % k]];

  Points samples;
  samples.reserve(n);
  for (std::size_t j = 0; j < k; ++j) {
    if (quota[j] <= 0) continue;
    const Points part = sample_surface(result.components[j].theta, quota[j], rng);
    samples.insert(samples.end(), part.begin(), part.end());
  }
  return samples;
}

namespace {

double mean_nearest_distance(const Points& from, const Points& to) {
  double total = 0.0;
  for (const Vec3& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& b : to) best = std::min(best, (a - b).squaredNorm());
    total += std::sqrt(best);
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double chamfer_l1(const AbstractionResult& result, const Points& ground_truth,
                  int n_samples, Rng& rng) {
  if (ground_truth.empty()) throw DegenerateInput("chamfer_l1: empty ground truth");
  if (result.components.empty()) return std::numeric_limits<double>::infinity();
  if (n_samples < 1) throw std::invalid_argument("chamfer_l1: n_samples must be >= 1");

  const Points raw = abstraction_surface_samples(result, n_samples, rng);
  const auto [lo, hi] = bounding_box(ground_truth);
  const double extent = (hi - lo).maxCoeff();
  const double scale = extent > 0.0 ? 1.0 / extent : 1.0;

  Points a(raw.size()), b(ground_truth.size());
  for (std::size_t i = 0; i < raw.size(); ++i) a[i] = (raw[i] - lo) * scale;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) b[i] = (ground_truth[i] - lo) * scale;

  return 0.5 * (mean_nearest_distance(a, b) + mean_nearest_distance(b, a));
}

std::vector<int> segmentation_labels(const AbstractionResult& result) {
  const std::size_t k = result.components.size();
  std::vector<int> counts(k, 0);
  for (int z : result.labels) ++counts[z];
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  std::vector<int> rank(k, 0);
  for (std::size_t r = 0; r < k; ++r) rank[order[r]] = static_cast<int>(r);
  std::vector<int> out(result.labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rank[result.labels[i]];
  return out;
}

}  // namespace sqabs
