#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "sqabs/errors.hpp"
#include "sqabs/fitting.hpp"
#include "sqabs/inference.hpp"
#include "sqabs/io.hpp"
#include "sqabs/merging.hpp"
#include "sqabs/metrics.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

int run_abstract(const std::string& input, const std::string& config_path,
                 const sqabs::SamplerConfig& overrides, const std::vector<bool>& has,
                 const std::string& out, const std::string& mesh_out,
                 const std::string& labels_out) {
  sqabs::SamplerConfig config;
  if (!config_path.empty()) config = sqabs::load_sampler_config(config_path);
  // flags beat the config file
  if (has[0]) config.seed = overrides.seed;
  if (has[1]) config.k_init = overrides.k_init;
  if (has[2]) config.alpha = overrides.alpha;
  if (has[3]) config.p0 = overrides.p0;
  if (has[4]) config.iterations = overrides.iterations;
  if (has[5]) config.merge_lambda = overrides.merge_lambda;
  if (has[6]) config.split_enabled = overrides.split_enabled;

  const sqabs::PointCloud cloud = sqabs::load_point_cloud(input);
  const sqabs::AbstractionResult result = sqabs::run_abstraction(cloud.points, config);
  sqabs::save_result(result, out);
  std::cout << "abstracted " << cloud.points.size() << " points into "
            << result.components.size() << " primitives -> " << out << "\n";
  if (!mesh_out.empty()) {
    const auto paths = sqabs::export_meshes(result, mesh_out, 32);
    std::cout << "wrote " << paths.size() << " meshes under " << mesh_out << "*\n";
  }
  if (!labels_out.empty()) {
    sqabs::save_labels(sqabs::segmentation_labels(result), labels_out);
    std::cout << "wrote labels -> " << labels_out << "\n";
  }
  return kExitOk;
}

int run_fit_one(const std::string& input, const std::string& out) {
  const sqabs::PointCloud cloud = sqabs::load_point_cloud(input);
  if (cloud.points.size() < 4)
    throw sqabs::DegenerateInput(input + ": need at least 4 points to fit");
  const sqabs::SuperquadricParams init = sqabs::moi_ellipsoid(cloud.points);
  const sqabs::FitReport report = sqabs::fit_superquadric(cloud.points, init, {});
  sqabs::AbstractionResult result;
  result.components.push_back(
      {report.theta, report.final_ssd / static_cast<double>(cloud.points.size())});
  result.labels.assign(cloud.points.size(), 0);
  sqabs::save_result(result, out);
  std::cout << "fit ssd " << report.final_ssd << " (converged: " << std::boolalpha
            << report.converged << ") -> " << out << "\n";
  return kExitOk;
}

int run_synth(const std::string& scene_path, bool has_seed, std::uint64_t seed,
              const std::string& out, const std::string& labels_out) {
  sqabs::SceneDescription scene = sqabs::load_scene(scene_path);
  if (has_seed) scene.seed = seed;
  sqabs::Rng rng(scene.seed);
  const auto [cloud, labels] = sqabs::synth_scene(scene, rng);
  sqabs::save_point_cloud(out, cloud.points);
  std::cout << "synthesized " << cloud.points.size() << " points -> " << out << "\n";
  if (!labels_out.empty()) {
    sqabs::save_labels(labels, labels_out);
    std::cout << "wrote labels -> " << labels_out << "\n";
  }
  return kExitOk;
}

int run_eval(const std::string& result_path, const std::string& gt_path, int iou_res,
             int samples) {
  const sqabs::AbstractionResult result = sqabs::load_result(result_path);
  const sqabs::PointCloud gt = sqabs::load_point_cloud(gt_path);

  sqabs::Rng rng(0);
  const double chamfer = sqabs::chamfer_l1(result, gt.points, samples, rng);
  // the cloud marks a surface shell; close it so the comparison is
  // volume against volume
  const sqabs::OccupancyGrid gt_grid = sqabs::occupancy_from_cloud(gt.points, iou_res);
  const double overlap = sqabs::iou(result, gt_grid);

  std::vector<int> counts(result.components.size(), 0);
  for (int z : result.labels) ++counts[z];
  std::sort(counts.begin(), counts.end(), std::greater<int>());

  nlohmann::json doc{{"chamfer_l1", chamfer},
                     {"iou", overlap},
                     {"k", result.components.size()},
                     {"per_cluster_counts", counts}};
  if (!std::isfinite(chamfer)) doc["error"] = "empty abstraction";
  std::cout << doc.dump(1) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tapered-superquadric shape abstraction for point clouds"};
  app.require_subcommand(1);

  // abstract
  auto* abstract = app.add_subcommand("abstract", "Infer a primitive abstraction");
  std::string in_path, config_path, out_path = "result.json", mesh_out, labels_out;
  sqabs::SamplerConfig flags;
  abstract->add_option("input", in_path, "point cloud (ply/obj/xyz)")->required();
  abstract->add_option("--config", config_path, "JSON config file");
  auto* o_seed = abstract->add_option("--seed", flags.seed, "RNG seed");
  auto* o_k = abstract->add_option("--k-init", flags.k_init, "initial cluster count");
  auto* o_alpha = abstract->add_option("--alpha", flags.alpha, "concentration factor");
  auto* o_p0 = abstract->add_option("--p0", flags.p0, "new-cluster predictive density");
  auto* o_iters = abstract->add_option("--iters", flags.iterations, "sweep count");
  auto* o_lambda =
      abstract->add_option("--merge-lambda", flags.merge_lambda, "merge acceptance ratio");
  auto* o_nosplit = abstract->add_flag("--no-split", "disable the splitting pass");
  abstract->add_option("--out", out_path, "result JSON path");
  abstract->add_option("--mesh-out", mesh_out, "OBJ export path prefix");
  abstract->add_option("--labels-out", labels_out, "segmentation labels path");

  // fit-one
  auto* fit_one = app.add_subcommand("fit-one", "Fit a single primitive to a cloud");
  std::string fit_in, fit_out = "result.json";
  std::uint64_t fit_seed = 0;
  fit_one->add_option("input", fit_in, "point cloud (ply/obj/xyz)")->required();
  fit_one->add_option("--seed", fit_seed, "RNG seed (reserved; the fit is deterministic)");
  fit_one->add_option("--out", fit_out, "result JSON path");

  // synth
  auto* synth = app.add_subcommand("synth", "Sample a synthetic scene");
  std::string scene_path, synth_out = "cloud.ply", synth_labels;
  std::uint64_t synth_seed = 0;
  synth->add_option("scene", scene_path, "scene JSON")->required();
  auto* o_synth_seed = synth->add_option("--seed", synth_seed, "override the scene seed");
  synth->add_option("--out", synth_out, "output cloud path");
  synth->add_option("--labels-out", synth_labels, "ground-truth labels path");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a result against a ground-truth cloud");
  std::string eval_result, eval_gt;
  int iou_res = 32, samples = 10000;
  eval->add_option("--result", eval_result, "result JSON")->required();
  eval->add_option("--gt", eval_gt, "ground-truth cloud")->required();
  eval->add_option("--iou-res", iou_res, "occupancy grid resolution");
  eval->add_option("--samples", samples, "surface sample count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (abstract->parsed()) {
      flags.split_enabled = o_nosplit->count() == 0;
      const std::vector<bool> has{o_seed->count() > 0,   o_k->count() > 0,
                                  o_alpha->count() > 0,  o_p0->count() > 0,
                                  o_iters->count() > 0,  o_lambda->count() > 0,
                                  o_nosplit->count() > 0};
      return run_abstract(in_path, config_path, flags, has, out_path, mesh_out, labels_out);
    }
    if (fit_one->parsed()) return run_fit_one(fit_in, fit_out);
    if (synth->parsed())
      return run_synth(scene_path, o_synth_seed->count() > 0, synth_seed, synth_out,
                       synth_labels);
    if (eval->parsed()) return run_eval(eval_result, eval_gt, iou_res, samples);
  } catch (const sqabs::UnknownFormat& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sqabs::MalformedRecord& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sqabs::EmptyCloud& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sqabs::VersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sqabs::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const sqabs::DegenerateInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
