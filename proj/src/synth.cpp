#include "stereosynth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

namespace stereosynth {

std::string to_string(GenerationMode mode) {
  switch (mode) {
    case GenerationMode::speckle: return "speckle";
    case GenerationMode::clean: return "clean";
    case GenerationMode::surface: return "surface";
  }
  return "unknown";
}

GenerationMode parse_generation_mode(std::string_view name) {
  if (name == "speckle") return GenerationMode::speckle;
  if (name == "clean") return GenerationMode::clean;
  if (name == "surface") return GenerationMode::surface;
  throw Error("unknown generation mode '" + std::string(name) + "' (speckle|clean|surface)");
}

void GenerationConfig::validate() const {
  if (!(distance_min_m > 0.0 && distance_min_m <= distance_max_m)) {
    throw Error("generation config: distance range must be positive and ordered");
  }
  if (!(elevation_min_deg <= elevation_max_deg)) {
    throw Error("generation config: elevation range must be ordered");
  }
  if (n_views < 1) throw Error("generation config: n_views must be >= 1");
  if (fps_points < 1) throw Error("generation config: fps_points must be >= 1");
  if (view_translation_jitter_m < 0.0 || view_rotation_jitter_rad < 0.0) {
    throw Error("generation config: jitter must be nonnegative");
  }
  if (!(baseline_m > 0.0)) throw Error("generation config: baseline must be positive");
  if (depth_downsample < 1 || render_width % depth_downsample != 0 ||
      render_height % depth_downsample != 0) {
    throw Error("generation config: depth_downsample must divide the render resolution");
  }
  if (!(dot_density > 0.0 && dot_density < 1.0)) throw Error("generation config: dot_density in (0,1)");
  if (surface_oversample < 1) throw Error("generation config: surface_oversample must be >= 1");
  if (repetitions < 1) throw Error("generation config: repetitions must be >= 1");
  intrinsics();
  lighting.validate();
  match.validate();
}

CameraIntrinsics GenerationConfig::intrinsics() const {
  return CameraIntrinsics::centered(focal_length_px, render_width, render_height);
}

nlohmann::json to_json(const GenerationConfig& c) {
  const Lighting& L = c.lighting;
  const MatchParams& M = c.match;
  return {
      {"distance_range_m", {c.distance_min_m, c.distance_max_m}},
      {"elevation_range_deg", {c.elevation_min_deg, c.elevation_max_deg}},
      {"n_views", c.n_views},
      {"view_translation_jitter_m", c.view_translation_jitter_m},
      {"view_rotation_jitter_rad", c.view_rotation_jitter_rad},
      {"baseline_m", c.baseline_m},
      {"render_resolution", {c.render_width, c.render_height}},
      {"focal_length_px", c.focal_length_px},
      {"depth_downsample", c.depth_downsample},
      {"fps_points", c.fps_points},
      {"mode", to_string(c.mode)},
      {"dot_density", c.dot_density},
      {"surface_oversample", c.surface_oversample},
      {"repetitions", c.repetitions},
      {"lighting",
       {{"albedo", L.albedo},
        {"light_position", {L.light_position.x(), L.light_position.y(), L.light_position.z()}},
        {"light_size", L.light_size},
        {"light_intensity", L.light_intensity},
        {"ambient", L.ambient},
        {"light_samples", L.light_samples},
        {"projector_intensity", L.projector_intensity}}},
      {"match",
       {{"window_radius", M.window_radius},
        {"max_disparity", M.max_disparity},
        {"uniqueness_ratio", M.uniqueness_ratio},
        {"lr_consistency_tol", M.lr_consistency_tol},
        {"texture_threshold", M.texture_threshold}}},
  };
}

GenerationConfig generation_config_from_json(const nlohmann::json& j) {
  GenerationConfig c;
  auto pair = [&](const char* key, auto& a, auto& b) {
    if (j.contains(key)) {
      a = j.at(key).at(0).get<std::decay_t<decltype(a)>>();
      b = j.at(key).at(1).get<std::decay_t<decltype(b)>>();
    }
  };
  auto get = [](const nlohmann::json& obj, const char* key, auto& out) {
    if (obj.contains(key)) out = obj.at(key).get<std::decay_t<decltype(out)>>();
  };
  pair("distance_range_m", c.distance_min_m, c.distance_max_m);
  pair("elevation_range_deg", c.elevation_min_deg, c.elevation_max_deg);
  pair("render_resolution", c.render_width, c.render_height);
  get(j, "n_views", c.n_views);
  get(j, "view_translation_jitter_m", c.view_translation_jitter_m);
  get(j, "view_rotation_jitter_rad", c.view_rotation_jitter_rad);
  get(j, "baseline_m", c.baseline_m);
  get(j, "focal_length_px", c.focal_length_px);
  get(j, "depth_downsample", c.depth_downsample);
  get(j, "fps_points", c.fps_points);
  if (j.contains("mode")) c.mode = parse_generation_mode(j.at("mode").get<std::string>());
  get(j, "dot_density", c.dot_density);
  get(j, "surface_oversample", c.surface_oversample);
  get(j, "repetitions", c.repetitions);
  if (j.contains("lighting")) {
    const auto& l = j.at("lighting");
    get(l, "albedo", c.lighting.albedo);
    if (l.contains("light_position")) {
      const auto& p = l.at("light_position");
      c.lighting.light_position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    }
    get(l, "light_size", c.lighting.light_size);
    get(l, "light_intensity", c.lighting.light_intensity);
    get(l, "ambient", c.lighting.ambient);
    get(l, "light_samples", c.lighting.light_samples);
    get(l, "projector_intensity", c.lighting.projector_intensity);
  }
  if (j.contains("match")) {
    const auto& m = j.at("match");
    get(m, "window_radius", c.match.window_radius);
    get(m, "max_disparity", c.match.max_disparity);
    get(m, "uniqueness_ratio", c.match.uniqueness_ratio);
    get(m, "lr_consistency_tol", c.match.lr_consistency_tol);
    get(m, "texture_threshold", c.match.texture_threshold);
  }
  return c;
}

std::vector<RigidPose> sample_camera_poses(Rng& rng, const GenerationConfig& cfg) {
  cfg.validate();
  constexpr double kDeg = std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> distance(cfg.distance_min_m, cfg.distance_max_m);
  std::uniform_real_distribution<double> elevation(cfg.elevation_min_deg * kDeg, cfg.elevation_max_deg * kDeg);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * std::numbers::pi);
  const double rho = distance(rng);
  const double el = elevation(rng);
  const double az = azimuth(rng);
  const Vec3 eye = rho * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));

  std::vector<RigidPose> poses;
  poses.reserve(static_cast<std::size_t>(cfg.n_views));
  poses.push_back(RigidPose::look_at(eye, Vec3::Zero()));
  const RigidPose& anchor = poses.front();

  const double tj = cfg.view_translation_jitter_m, rj = cfg.view_rotation_jitter_rad;
  std::uniform_real_distribution<double> shift(-tj, tj);
  std::uniform_real_distribution<double> tilt(-rj, rj);
  for (int v = 1; v < cfg.n_views; ++v) {
    RigidPose variant;
    const double dx = shift(rng), dy = shift(rng), dz = shift(rng);
    const double roll = tilt(rng), pitch = tilt(rng), yaw = tilt(rng);
    variant.translation = anchor.translation + Vec3(dx, dy, dz);
    variant.rotation = anchor.rotation * rotation_euler(roll, pitch, yaw);
    poses.push_back(variant);
  }
  return poses;
}

TriangleMesh preprocess_mesh(const TriangleMesh& mesh, Rng& rng) {
  return random_z_rotation(normalize_to_unit_cube(mesh), rng);
}

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, Rng& rng) {
  if (mesh.empty()) throw Error("sample_surface: empty mesh");
  std::vector<double> cdf(mesh.face_count());
  double acc = 0.0;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    acc += mesh.face_area(f);
    cdf[f] = acc;
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  PointCloud cloud;
  cloud.points.reserve(n);
  const auto& v = mesh.vertices();
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = u01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
    const auto f = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    const auto& face = mesh.faces()[f];
    const double s = std::sqrt(u01(rng));
    const double t = u01(rng);
    cloud.points.push_back((1.0 - s) * v[face[0]] + s * (1.0 - t) * v[face[1]] + s * t * v[face[2]]);
  }
  return cloud;
}

PointCloud generate_instance(const TriangleMesh& mesh, int class_id, const GenerationConfig& cfg,
                             std::uint64_t seed, int workers, InstanceArtifacts* artifacts) {
  cfg.validate();
  PointCloud fused;
  if (cfg.mode == GenerationMode::surface) {
    Rng surface_rng(derive_seed(seed, "surface"));
    fused = sample_surface(mesh, static_cast<std::size_t>(cfg.surface_oversample) * cfg.fps_points,
                           surface_rng);
  } else {
    Rng pose_rng(derive_seed(seed, "poses"));
    const auto poses = sample_camera_poses(pose_rng, cfg);
    const Scene scene(mesh, cfg.lighting);
    const CameraIntrinsics full = cfg.intrinsics();
    const CameraIntrinsics reduced = full.downsampled(cfg.depth_downsample);

    SpecklePattern pattern;
    if (cfg.mode == GenerationMode::speckle) {
      pattern = make_speckle_pattern(derive_seed(seed, "pattern"), cfg.render_width,
                                     cfg.render_height, cfg.dot_density);
    }

    std::vector<PointCloud> views;
    for (const RigidPose& pose : poses) {
      ViewArtifacts view;
      view.pose = pose;
      view.depth_intrinsics = reduced;
      if (cfg.mode == GenerationMode::speckle) {
        StereoRig rig{full, pose, cfg.baseline_m, full};
        view.images = render_stereo(scene, rig, pattern, workers);
        view.disparity = block_match(view.images.left, view.images.right, cfg.match, workers);
        const DepthMap depth = disparity_to_depth(view.disparity, full.focal_length_px, cfg.baseline_m);
        view.depth = downsample_depth(depth, cfg.depth_downsample);
      } else {
        // Clean depth is rendered directly at the reduced resolution so its
        // point density matches the speckle pipeline.
        view.depth = render_clean_depth(scene, Camera{reduced, pose}, workers);
      }
      if (view.depth.valid_count() > 0) views.push_back(backproject(view.depth, reduced, pose));
      if (artifacts) artifacts->views.push_back(std::move(view));
    }
    std::size_t total = 0;
    for (const auto& v : views) total += v.size();
    if (total < static_cast<std::size_t>(cfg.fps_points)) {
      throw Error("generate_instance: only " + std::to_string(total) + " points from " +
                  std::to_string(cfg.n_views) + " views, need " + std::to_string(cfg.fps_points));
    }
    fused = fuse_views(views);
  }
  if (fused.size() < static_cast<std::size_t>(cfg.fps_points)) {
    throw Error("generate_instance: too few surface points");
  }
  if (artifacts) artifacts->fused = fused;

  Rng fps_rng(derive_seed(seed, "fps"));
  PointCloud out = farthest_point_sample(fused, static_cast<std::size_t>(cfg.fps_points), fps_rng);
  out.label = class_id;
  return out;
}

}  // namespace stereosynth
