#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqabs/geometry.hpp"
#include "sqabs/inference.hpp"

namespace sqabs {

inline constexpr const char* kResultVersion = "sqabs-result-1";
inline constexpr const char* kSceneVersion = "sqabs-scene-1";

enum class CloudFormat { Auto, Ply, Obj, Xyz };

struct PointCloud {
  Points points;
  std::string source_path;
};

struct SceneComponent {
  SuperquadricParams params;
  double sigma2 = 0.0;
  int count = 0;
};

// Ground-truth generator description for synthetic clouds.
struct SceneDescription {
  std::vector<SceneComponent> components;
  std::uint64_t seed = 0;
};

// PLY (ascii / binary little-endian), OBJ (v records), or XYZ triples.
// Malformed records are rejected with their row number, never skipped.
PointCloud load_point_cloud(const std::string& path, CloudFormat format = CloudFormat::Auto);

// Writer counterpart; format chosen by extension (.ply ascii, .obj, .xyz).
void save_point_cloud(const std::string& path, const Points& points);

void save_result(const AbstractionResult& result, const std::string& path);
AbstractionResult load_result(const std::string& path);

void save_scene(const SceneDescription& scene, const std::string& path);
SceneDescription load_scene(const std::string& path);

// Concatenated draws from each scene component, with provenance labels.
std::pair<PointCloud, std::vector<int>> synth_scene(const SceneDescription& scene, Rng& rng);

// One OBJ per component (indexed by final label id, largest cluster first)
// plus a combined OBJ; returns the written paths.
std::vector<std::string> export_meshes(const AbstractionResult& result,
                                       const std::string& path_prefix, int resolution);

void save_labels(const std::vector<int>& labels, const std::string& path);

// JSON config mirroring SamplerConfig; unknown keys are rejected.
SamplerConfig load_sampler_config(const std::string& path);

}  // namespace sqabs
