#include "sqabs/inference.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sqabs/errors.hpp"
#include "sqabs/fitting.hpp"
#include "sqabs/merging.hpp"

namespace sqabs {

namespace {

constexpr double kLogFloor = -1e300;

double median(std::vector<double> v) {
  if (v.empty()) return 1.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int categorical_draw(const std::vector<double>& probs, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u = u01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

// Component opened for a point that started its own cluster: a small
// ellipsoid the first refit will correct.
GstmComponent spawn_component(const Vec3& at, double bbox_diag,
                              const std::vector<GstmComponent>& existing) {
  GstmComponent c;
  const double a = std::max(0.05 * bbox_diag, 1e-6);
  c.theta.ax = c.theta.ay = c.theta.az = a;
  c.theta.translation = at;
  std::vector<double> sigmas;
  sigmas.reserve(existing.size());
  for (const auto& e : existing) sigmas.push_back(e.sigma2);
  c.sigma2 = median(std::move(sigmas));
  return c;
}

}  // namespace

Points ClusterState::member_points(int j) const {
  Points out;
  out.reserve(counts[j]);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == j) out.push_back(points[i]);
  return out;
}

void ClusterState::remove_empty_clusters() {
  std::vector<int> remap(components.size(), -1);
  std::vector<GstmComponent> live;
  std::vector<int> live_counts;
  for (std::size_t j = 0; j < components.size(); ++j) {
    if (counts[j] > 0) {
      remap[j] = static_cast<int>(live.size());
      live.push_back(components[j]);
      live_counts.push_back(counts[j]);
    }
  }
  for (int& z : labels) z = remap[z];
  components = std::move(live);
  counts = std::move(live_counts);
}

bool ClusterState::consistent() const {
  if (labels.size() != points.size()) return false;
  if (counts.size() != components.size()) return false;
  std::vector<int> hist(components.size(), 0);
  for (int z : labels) {
    if (z < 0 || z >= cluster_count()) return false;
    ++hist[z];
  }
  return hist == counts;
}

Vec3 gstm_sample(const GstmComponent& component, Rng& rng) {
  return gstm_samples(component, 1, rng).front();
}

Points gstm_samples(const GstmComponent& component, int n, Rng& rng) {
  Points mus = sample_surface_canonical(component.theta, n, rng);
  const double sigma = std::sqrt(std::max(component.sigma2, 0.0));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> u_eta(-M_PI / 2.0, M_PI / 2.0);
  std::uniform_real_distribution<double> u_omega(-M_PI, M_PI);
  Points out;
  out.reserve(n);
  for (Vec3& mu : mus) {
    while (mu.norm() < 1e-12) mu = surface_point(component.theta, u_eta(rng), u_omega(rng));
    const double tau = sigma > 0.0 ? sigma * noise(rng) : 0.0;
    out.push_back(from_canonical(component.theta, (1.0 + tau / mu.norm()) * mu));
  }
  return out;
}

double point_log_density(const Vec3& x, const GstmComponent& component,
                         double sentinel) {
  const double sigma = std::sqrt(component.sigma2);
  const double d = radial_distance(component.theta, x, sentinel);
  const double lp = -std::log(2.0 * std::sqrt(2.0 * M_PI) * sigma) -
                    d * d / (2.0 * component.sigma2);
  return std::isfinite(lp) ? std::max(lp, kLogFloor) : kLogFloor;
}

std::vector<int> kmeans_init(const Points& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.size());
  if (k < 1) throw std::invalid_argument("kmeans_init: k must be >= 1");
  if (n < k) throw DegenerateInput("kmeans_init: fewer points than clusters");

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec3> centers;
  centers.reserve(k);
  std::uniform_int_distribution<int> ui(0, n - 1);
  centers.push_back(points[ui(rng)]);
  std::vector<double> d2(n);
  std::vector<char> chosen(n, 0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& c : centers) best = std::min(best, (points[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    int pick = -1;
    if (total > 0.0) {
      const double u = u01(rng) * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;
    } else {
      // all residual distances zero (duplicate-heavy input): take the first
      // index not already used as a center
      for (int i = 0; i < n && pick < 0; ++i)
        if (!chosen[i]) pick = i;
      if (pick < 0) pick = 0;
    }
    chosen[pick] = 1;
    centers.push_back(points[pick]);
  }

  std::vector<int> labels(n, 0);
  auto assign = [&]() {
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int arg = 0;
      for (int j = 0; j < k; ++j) {
        const double d = (points[i] - centers[j]).squaredNorm();
        if (d < best) {
          best = d;
          arg = j;
        }
      }
      labels[i] = arg;
    }
  };

  for (int iter = 0; iter < 100; ++iter) {
    assign();
    std::vector<Vec3> sums(k, Vec3::Zero());
    std::vector<int> cnt(k, 0);
    for (int i = 0; i < n; ++i) {
      sums[labels[i]] += points[i];
      ++cnt[labels[i]];
    }
    bool restarted = false;
    double shift = 0.0;
    for (int j = 0; j < k; ++j) {
      if (cnt[j] == 0) {
        // reseat an emptied cluster at the point farthest from its center
        double far_d = -1.0;
        int far_i = 0;
        for (int i = 0; i < n; ++i) {
          const double d = (points[i] - centers[labels[i]]).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centers[j] = points[far_i];
        restarted = true;
        continue;
      }
      const Vec3 next = sums[j] / cnt[j];
      shift = std::max(shift, (next - centers[j]).norm());
      centers[j] = next;
    }
    if (!restarted && shift < 1e-6) break;
  }
  assign();
  return labels;
}

SuperquadricParams moi_ellipsoid(const Points& points) {
  const int n = static_cast<int>(points.size());
  if (n < 1) throw DegenerateInput("moi_ellipsoid: empty point set");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= n;

  Eigen::Matrix3d second = Eigen::Matrix3d::Zero();
  for (const Vec3& p : points) {
    const Vec3 r = p - centroid;
    second += r * r.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(second);
  Eigen::Matrix3d axes = eig.eigenvectors();  // ascending eigenvalues
  if (axes.determinant() < 0.0) axes.col(0) = -axes.col(0);

  const auto [lo, hi] = bounding_box(points);
  const double floor_axis = std::max(1e-3 * (hi - lo).norm(), 1e-6);

  SuperquadricParams params;
  // Solid ellipsoid with a quarter of the point set's inertia: per-axis
  // semi-axis^2 = (5/4) * second moment / n. Largest spread plays z.
  for (int i = 0; i < 3; ++i) {
    const double a =
        std::sqrt(std::max(1.25 * eig.eigenvalues()[i] / n, 0.0));
    (i == 0 ? params.ax : i == 1 ? params.ay : params.az) =
        std::max(a, floor_axis);
  }
  params.rotation = Eigen::Quaterniond(axes).normalized();
  params.translation = centroid;
  return params;
}

std::vector<double> assignment_probabilities(const Vec3& x,
                                             const std::vector<GstmComponent>& components,
                                             const std::vector<int>& counts_excl,
                                             const SamplerConfig& config) {
  const std::size_t k = components.size();
  std::vector<double> logw(k + 1, kLogFloor);
  for (std::size_t j = 0; j < k; ++j) {
    if (counts_excl[j] <= 0) continue;
    logw[j] = std::log(static_cast<double>(counts_excl[j])) +
              point_log_density(x, components[j], config.sentinel_distance);
  }
  logw[k] = std::log(config.alpha) + std::log(config.p0);

  const double lmax = *std::max_element(logw.begin(), logw.end());
  std::vector<double> probs(k + 1, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j <= k; ++j) {
    if (logw[j] <= kLogFloor) continue;
    probs[j] = std::exp(logw[j] - lmax);
    total += probs[j];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    // underflow guard: fall back to the nearest cluster by distance
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = k;
    for (std::size_t j = 0; j < k; ++j) {
      if (counts_excl[j] <= 0) continue;
      const double d = radial_distance(components[j].theta, x, config.sentinel_distance);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    std::fill(probs.begin(), probs.end(), 0.0);
    probs[arg] = 1.0;
    return probs;
  }
  for (double& p : probs) p /= total;
  return probs;
}

void sample_assignments(ClusterState& state, const SamplerConfig& config, Rng& rng) {
  const double diag = bbox_diagonal(state.points);
  const std::size_t n = state.points.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int old = state.labels[i];
    --state.counts[old];

    const auto probs =
        assignment_probabilities(state.points[i], state.components, state.counts, config);
    const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (std::abs(sum - 1.0) >= 1e-12)
      throw Error("sample_assignments: probabilities failed to normalize");

    const int draw = categorical_draw(probs, rng);
    if (draw == state.cluster_count()) {
      state.components.push_back(spawn_component(state.points[i], diag, state.components));
      state.counts.push_back(1);
      state.labels[i] = state.cluster_count() - 1;
    } else {
      state.labels[i] = draw;
      ++state.counts[draw];
    }
  }
  state.remove_empty_clusters();
}

double draw_precision(int n, double sum_sq_distance, Rng& rng) {
  const double d = std::max(sum_sq_distance, 1e-12);
  const double shape = std::max((n - 1) / 2.0, 0.5);
  std::gamma_distribution<double> gamma(shape, 2.0 / d);
  return std::max(gamma(rng), 1e-300);
}

void sample_sigmas(ClusterState& state, Rng& rng, double sentinel) {
  const int k = state.cluster_count();
  std::vector<double> sum_sq(k, 0.0);
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    const double d = radial_distance(state.components[state.labels[i]].theta,
                                     state.points[i], sentinel);
    sum_sq[state.labels[i]] += d * d;
  }
  for (int j = 0; j < k; ++j)
    state.components[j].sigma2 = 1.0 / draw_precision(state.counts[j], sum_sq[j], rng);
}

bool split_pass(ClusterState& state, const SamplerConfig& config, Rng& rng) {
  if (!config.split_enabled) return false;
  const int k = state.cluster_count();
  std::vector<double> sum_sq(k, 0.0);
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    const double d = radial_distance(state.components[state.labels[i]].theta,
                                     state.points[i], config.sentinel_distance);
    sum_sq[state.labels[i]] += d * d;
  }
  int worst = -1;
  double worst_mean = -1.0;
  for (int j = 0; j < k; ++j) {
    const double mean = sum_sq[j] / state.counts[j];
    if (mean > worst_mean) {
      worst_mean = mean;
      worst = j;
    }
  }
  if (worst < 0) return false;
  if (state.counts[worst] < 2 * config.min_cluster_for_fit) return false;
  if (worst_mean <= 4.0 * state.components[worst].sigma2) return false;

  const Points members = state.member_points(worst);
  const std::vector<int> halves = kmeans_init(members, 2, rng);
  Points half_a, half_b;
  for (std::size_t m = 0; m < members.size(); ++m)
    (halves[m] == 0 ? half_a : half_b).push_back(members[m]);
  if (half_a.empty() || half_b.empty()) return false;

  const double parent_sigma2 = state.components[worst].sigma2;
  GstmComponent a{moi_ellipsoid(half_a), parent_sigma2};
  GstmComponent b{moi_ellipsoid(half_b), parent_sigma2};
  state.components[worst] = a;
  state.components.push_back(b);
  state.counts[worst] = static_cast<int>(half_a.size());
  state.counts.push_back(static_cast<int>(half_b.size()));
  const int new_id = state.cluster_count() - 1;
  std::size_t m = 0;
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    if (state.labels[i] != worst) continue;
    if (halves[m++] == 1) state.labels[i] = new_id;
  }
  return true;
}

double total_squared_distance(const ClusterState& state, double sentinel) {
  double total = 0.0;
  for (std::size_t i = 0; i < state.points.size(); ++i) {
    const double d = radial_distance(state.components[state.labels[i]].theta,
                                     state.points[i], sentinel);
    total += d * d;
  }
  return total;
}

namespace {

void refit_components(ClusterState& state, const SamplerConfig& config) {
  FitOptions warm_opts;
  warm_opts.multistart = false;
  warm_opts.max_iterations = 60;
  FitOptions fresh_opts;
  fresh_opts.max_iterations = 60;

  for (int j = 0; j < state.cluster_count(); ++j) {
    const Points members = state.member_points(j);
    const SuperquadricParams moi = moi_ellipsoid(members);
    if (state.counts[j] < config.min_cluster_for_fit) {
      state.components[j].theta = moi;
      continue;
    }
    const FitReport warm = fit_superquadric(members, state.components[j].theta, warm_opts);
    const FitReport fresh = fit_superquadric(members, moi, fresh_opts);
    const FitReport& best = warm.final_ssd <= fresh.final_ssd ? warm : fresh;
    state.components[j].theta = best.theta.valid(1e-6) ? best.theta : moi;
  }
}

}  // namespace

AbstractionResult run_abstraction(const Points& points, const SamplerConfig& config) {
  if (points.size() < 10) throw DegenerateInput("run_abstraction: need at least 10 points");
  if (config.alpha <= 0.0 || config.p0 <= 0.0 || config.iterations < 1 || config.k_init < 1)
    throw std::invalid_argument("run_abstraction: invalid sampler configuration");

  Rng rng(config.seed);
  const int k = std::min<int>(config.k_init, static_cast<int>(points.size()));

  ClusterState state;
  state.points = points;
  state.labels = kmeans_init(points, k, rng);
  state.counts.assign(k, 0);
  for (int z : state.labels) ++state.counts[z];
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int j = 0; j < k; ++j) {
    GstmComponent c;
    c.theta = moi_ellipsoid(state.member_points(j));
    c.sigma2 = 1.0 - u01(rng);  // (0, 1]
    state.components.push_back(c);
  }
  state.remove_empty_clusters();

  AbstractionResult result;
  result.trace.reserve(config.iterations);
  for (int t = 0; t < config.iterations; ++t) {
    result.trace.push_back(
        {state.cluster_count(), total_squared_distance(state, config.sentinel_distance)});
    split_pass(state, config, rng);
    sample_assignments(state, config, rng);
    refit_components(state, config);
    sample_sigmas(state, rng, config.sentinel_distance);
  }

  FitOptions merge_opts;
  merge_opts.max_iterations = 60;
  merge_pass(state, config.merge_lambda, merge_opts, rng);

  result.components = std::move(state.components);
  result.labels = std::move(state.labels);
  return result;
}

}  // namespace sqabs
