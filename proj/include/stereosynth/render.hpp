#pragma once

#include "stereosynth/bvh.hpp"
#include "stereosynth/image.hpp"

#include <memory>
#include <utility>

namespace stereosynth {

/// Pinhole intrinsics. Pixel (u, v) integer coordinates denote pixel centres.
struct CameraIntrinsics {
  double focal_length_px = 1000.0;
  Vec2 principal_point = {539.5, 539.5};
  int width = 1080;
  int height = 1080;

  /// Principal point at the exact image centre.
  static CameraIntrinsics centered(double focal_px, int width, int height);

  void validate() const;
  /// Intrinsics of the image obtained by averaging factor×factor blocks.
  CameraIntrinsics downsampled(int factor) const;

  Vec2 project(const Vec3& p_cam) const {
    return {focal_length_px * p_cam.x() / p_cam.z() + principal_point.x(),
            focal_length_px * p_cam.y() / p_cam.z() + principal_point.y()};
  }
  /// Camera-frame direction (unnormalized, z = 1) through pixel (u, v).
  Vec3 pixel_direction(double u, double v) const {
    return {(u - principal_point.x()) / focal_length_px, (v - principal_point.y()) / focal_length_px,
            1.0};
  }
  bool contains(const Vec2& uv) const {
    return uv.x() >= -0.5 && uv.y() >= -0.5 && uv.x() < width - 0.5 && uv.y() < height - 0.5;
  }
};

struct Camera {
  CameraIntrinsics intrinsics;
  RigidPose pose;  // camera-to-world
};

/// Rectified stereo pair plus a projector midway between the cameras. The
/// right camera and projector share the left camera's orientation and are
/// offset along its x axis, so rectification holds by construction.
struct StereoRig {
  CameraIntrinsics intrinsics;
  RigidPose left_pose;
  double baseline_m = 0.10;
  CameraIntrinsics projector_intrinsics;

  void validate() const;
  Camera left() const { return {intrinsics, left_pose}; }
  Camera right() const;
  Camera projector() const;
};

/// Grayscale dot texture sampled by the projector.
struct SpecklePattern {
  GrayImage texture;
  double dot_density = 0.15;
  std::uint64_t seed = 0;

  /// Bilinear lookup in texel coordinates (texel centres at integers);
  /// zero outside the texture.
  double sample(double s, double t) const;
};

/// Pseudo-random dot field: Gaussian splats (σ = 1 texel, peak 1, combined by
/// max) at seeded uniform positions. The splat count is chosen so the
/// expected fraction of texels above 0.5 equals `dot_density`.
SpecklePattern make_speckle_pattern(std::uint64_t seed, int width, int height, double dot_density);

/// Illumination and material parameters.
struct Lighting {
  double albedo = 0.7;
  Vec3 light_position = {0.0, 0.0, 3.0};
  double light_size = 1.0;  // side of the square emitter; 0 = point light
  double light_intensity = 2.0;
  double ambient = 0.05;
  int light_samples = 16;  // perfect square; stratified grid on the emitter
  double projector_intensity = 0.6;

  void validate() const;
};

/// Mesh + acceleration structure + lighting. Immutable once built; safe to
/// share between render workers.
class Scene {
 public:
  Scene() = default;
  Scene(TriangleMesh mesh, Lighting lighting);

  const TriangleMesh& mesh() const { return *mesh_; }
  const Bvh& bvh() const { return *bvh_; }
  const Lighting& lighting() const { return lighting_; }
  bool empty() const { return !mesh_ || mesh_->empty(); }

 private:
  std::shared_ptr<const TriangleMesh> mesh_;
  std::shared_ptr<const Bvh> bvh_;
  Lighting lighting_;
};

struct StereoImages {
  GrayImage left;
  GrayImage right;
};

/// One camera image under area-light + projector illumination.
/// `pattern` may be null (projector off).
GrayImage render_view(const Scene& scene, const Camera& camera, const Camera& projector,
                      const SpecklePattern* pattern, int workers = 1);

StereoImages render_stereo(const Scene& scene, const StereoRig& rig, const SpecklePattern& pattern,
                           int workers = 1);

/// Optical-axis depth of the nearest hit per pixel; misses are invalid.
DepthMap render_clean_depth(const Scene& scene, const Camera& camera, int workers = 1);

}  // namespace stereosynth
