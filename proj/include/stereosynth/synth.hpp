#pragma once

#include "stereosynth/geometry.hpp"
#include "stereosynth/pointcloud.hpp"
#include "stereosynth/render.hpp"
#include "stereosynth/stereo.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace stereosynth {

enum class GenerationMode { speckle, clean, surface };

std::string to_string(GenerationMode mode);
GenerationMode parse_generation_mode(std::string_view name);

struct GenerationConfig {
  double distance_min_m = 3.0;
  double distance_max_m = 5.0;
  double elevation_min_deg = 20.0;
  double elevation_max_deg = 50.0;
  int n_views = 3;
  double view_translation_jitter_m = 0.10;  // per axis, uniform in (-j, j)
  double view_rotation_jitter_rad = 0.1;    // per Euler angle
  double baseline_m = 0.10;
  int render_width = 1080;
  int render_height = 1080;
  double focal_length_px = 1000.0;
  int depth_downsample = 4;  // 1080 -> 270
  int fps_points = 2048;
  GenerationMode mode = GenerationMode::speckle;

  double dot_density = 0.15;  // pattern resolution = projector resolution = render resolution
  Lighting lighting;
  MatchParams match;
  int surface_oversample = 10;  // surface mode samples this many × fps_points before FPS
  int repetitions = 1;          // instances per mesh

  void validate() const;
  CameraIntrinsics intrinsics() const;
};

nlohmann::json to_json(const GenerationConfig& cfg);
/// Missing keys keep their defaults.
GenerationConfig generation_config_from_json(const nlohmann::json& j);

/// Left-camera poses: a seeded anchor on the viewing sphere looking at the
/// origin, then n_views - 1 jittered variants of it.
std::vector<RigidPose> sample_camera_poses(Rng& rng, const GenerationConfig& cfg);

/// Unit-cube normalization followed by a random rotation about z.
TriangleMesh preprocess_mesh(const TriangleMesh& mesh, Rng& rng);

/// Area-weighted uniform samples on the mesh surface.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng);

struct ViewArtifacts {
  RigidPose pose;
  StereoImages images;    // speckle mode only
  DisparityMap disparity; // speckle mode only, full resolution
  DepthMap depth;         // depth that was back-projected
  CameraIntrinsics depth_intrinsics;
};

struct InstanceArtifacts {
  std::vector<ViewArtifacts> views;
  PointCloud fused;
};

/// Runs the full pipeline for one (already normalized) mesh. All randomness
/// derives from `seed`. Throws if fewer than cfg.fps_points points survive
/// fusion.
PointCloud generate_instance(const TriangleMesh& mesh, int class_id, const GenerationConfig& cfg,
                             std::uint64_t seed, int workers = 1,
                             InstanceArtifacts* artifacts = nullptr);

struct ManifestEntry {
  std::string id;
  int class_index = 0;
  std::string class_name;
  std::string mesh_path;
  std::string cloud_path;  // relative to the manifest directory
  std::uint64_t seed = 0;
  std::string mode;
};

struct DatasetManifest {
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;
  nlohmann::json config;
  std::filesystem::path root;  // directory cloud paths are relative to; not serialized
};

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);
/// Loads every cloud with its label set from the entry.
std::vector<PointCloud> load_clouds(const DatasetManifest& manifest);
std::vector<int> manifest_labels(const DatasetManifest& manifest);

/// `mesh_dir` holds one subdirectory per class (sorted names → class indices)
/// containing .obj/.ply meshes. Writes clouds/<class>/<stem>_r<k>.bin and
/// manifest.json under `out_dir`. The manifest is written only after every
/// instance succeeded.
DatasetManifest generate_dataset(const std::filesystem::path& mesh_dir,
                                 const std::filesystem::path& out_dir, const GenerationConfig& cfg,
                                 std::uint64_t seed, int workers = 1);

/// Writes <out>/<class>/<class>_NNN.obj for the classes box, cone, cylinder
/// and sphere, each shape with seeded proportions. Returns the class names.
std::vector<std::string> write_shape_benchmark(const std::filesystem::path& out_dir, int per_class,
                                               std::uint64_t seed);

}  // namespace stereosynth
