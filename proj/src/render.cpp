#include "stereosynth/render.hpp"

#include <cmath>
#include <numbers>

namespace stereosynth {

CameraIntrinsics CameraIntrinsics::centered(double focal_px, int width, int height) {
  CameraIntrinsics k;
  k.focal_length_px = focal_px;
  k.width = width;
  k.height = height;
  k.principal_point = {0.5 * (width - 1), 0.5 * (height - 1)};
  k.validate();
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(focal_length_px > 0.0)) throw Error("intrinsics: focal length must be positive");
  if (width < 2 || height < 2) throw Error("intrinsics: resolution must be at least 2x2");
  if (!(principal_point.x() >= 0.0 && principal_point.x() <= width - 1 &&
        principal_point.y() >= 0.0 && principal_point.y() <= height - 1)) {
    throw Error("intrinsics: principal point outside the image");
  }
}

CameraIntrinsics CameraIntrinsics::downsampled(int factor) const {
  if (factor < 1 || width % factor != 0 || height % factor != 0) {
    throw Error("intrinsics: downsample factor must divide the resolution");
  }
  CameraIntrinsics k;
  k.focal_length_px = focal_length_px / factor;
  k.width = width / factor;
  k.height = height / factor;
  // Block (i) covers source pixels [f*i, f*i + f - 1]; its centre is f*i + (f-1)/2.
  const double shift = 0.5 * (factor - 1);
  k.principal_point = (principal_point - Vec2::Constant(shift)) / factor;
  return k;
}

void StereoRig::validate() const {
  intrinsics.validate();
  projector_intrinsics.validate();
  if (!(baseline_m > 0.0)) throw Error("stereo rig: baseline must be positive");
  if (!left_pose.is_valid(1e-9)) throw Error("stereo rig: left pose is not a rigid transform");
}

Camera StereoRig::right() const {
  RigidPose pose = left_pose;
  pose.translation += baseline_m * left_pose.rotation.col(0);
  return {intrinsics, pose};
}

Camera StereoRig::projector() const {
  RigidPose pose = left_pose;
  pose.translation += 0.5 * baseline_m * left_pose.rotation.col(0);
  return {projector_intrinsics, pose};
}

double SpecklePattern::sample(double s, double t) const {
  const int w = texture.width, h = texture.height;
  const double fs = std::floor(s), ft = std::floor(t);
  const int x0 = static_cast<int>(fs), y0 = static_cast<int>(ft);
  const double ax = s - fs, ay = t - ft;
  auto texel = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return texture.at(x, y);
  };
  return (1 - ay) * ((1 - ax) * texel(x0, y0) + ax * texel(x0 + 1, y0)) +
         ay * ((1 - ax) * texel(x0, y0 + 1) + ax * texel(x0 + 1, y0 + 1));
}

SpecklePattern make_speckle_pattern(std::uint64_t seed, int width, int height, double dot_density) {
  if (!(dot_density > 0.0 && dot_density < 1.0)) {
    throw Error("speckle: dot_density must lie in (0, 1)");
  }
  if (width < 1 || height < 1) throw Error("speckle: empty resolution");
  SpecklePattern pattern;
  pattern.texture = GrayImage(width, height, 0.0f);
  pattern.dot_density = dot_density;
  pattern.seed = seed;

  // A unit-peak Gaussian with σ = 1 exceeds 0.5 within r² < 2 ln 2. Poisson
  // coverage then gives lit fraction 1 - exp(-n * area / (W*H)) = density.
  const double lit_area = std::numbers::pi * 2.0 * std::numbers::ln2;
  const double texels = static_cast<double>(width) * height;
  const auto n_dots = static_cast<std::size_t>(std::llround(-std::log1p(-dot_density) * texels / lit_area));

  Rng rng(seed);
  std::uniform_real_distribution<double> ux(-0.5, width - 0.5);
  std::uniform_real_distribution<double> uy(-0.5, height - 0.5);
  constexpr int kReach = 3;
  for (std::size_t i = 0; i < n_dots; ++i) {
    const double cx = ux(rng);
    const double cy = uy(rng);
    const int x0 = static_cast<int>(std::lround(cx));
    const int y0 = static_cast<int>(std::lround(cy));
    for (int y = std::max(0, y0 - kReach); y <= std::min(height - 1, y0 + kReach); ++y) {
      for (int x = std::max(0, x0 - kReach); x <= std::min(width - 1, x0 + kReach); ++x) {
        const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const auto value = static_cast<float>(std::exp(-0.5 * r2));
        float& t = pattern.texture.at(x, y);
        if (value > t) t = value;
      }
    }
  }
  return pattern;
}

void Lighting::validate() const {
  if (!(albedo > 0.0 && albedo <= 1.0)) throw Error("lighting: albedo must lie in (0, 1]");
  if (light_intensity < 0.0 || ambient < 0.0 || projector_intensity < 0.0) {
    throw Error("lighting: intensities must be nonnegative");
  }
  if (light_size < 0.0) throw Error("lighting: light size must be nonnegative");
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(light_samples))));
  if (light_samples < 1 || k * k != light_samples) {
    throw Error("lighting: light_samples must be a positive perfect square");
  }
}

Scene::Scene(TriangleMesh mesh, Lighting lighting) : lighting_(lighting) {
  lighting_.validate();
  auto m = std::make_shared<const TriangleMesh>(std::move(mesh));
  bvh_ = std::make_shared<const Bvh>(*m);
  mesh_ = std::move(m);
}

namespace {

constexpr double kShadowOffset = 1e-6;

struct Shader {
  const Scene& scene;
  const Camera& projector;
  const SpecklePattern* pattern;
  std::vector<Vec3> light_points;
  Vec3 projector_center;

  Shader(const Scene& s, const Camera& proj, const SpecklePattern* pat)
      : scene(s), projector(proj), pattern(pat), projector_center(proj.pose.translation) {
    const Lighting& L = s.lighting();
    const int k = L.light_size > 0.0
                      ? static_cast<int>(std::lround(std::sqrt(static_cast<double>(L.light_samples))))
                      : 1;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        const double ox = ((i + 0.5) / k - 0.5) * L.light_size;
        const double oy = ((j + 0.5) / k - 0.5) * L.light_size;
        light_points.push_back(L.light_position + Vec3(ox, oy, 0.0));
      }
    }
  }

  bool visible(const Vec3& from, const Vec3& to) const {
    Vec3 dir = to - from;
    const double dist = dir.norm();
    dir /= dist;
    Ray shadow{from, dir, 0.0, dist * (1.0 - 1e-9)};
    return !scene.bvh().occluded(shadow);
  }

  // Lambertian emitter facing -z.
  double area_light(const Vec3& p, const Vec3& n) const {
    double sum = 0.0;
    for (const Vec3& s : light_points) {
      Vec3 w = s - p;
      const double d2 = w.squaredNorm();
      w /= std::sqrt(d2);
      const double cos_surface = n.dot(w);
      const double cos_emitter = w.z();
      if (cos_surface <= 0.0 || cos_emitter <= 0.0) continue;
      if (!visible(p, s)) continue;
      sum += cos_surface * cos_emitter / d2;
    }
    return scene.lighting().light_intensity * sum / static_cast<double>(light_points.size());
  }

  double projector_term(const Vec3& p_surface, const Vec3& p, const Vec3& n) const {
    if (!pattern || scene.lighting().projector_intensity <= 0.0) return 0.0;
    const Vec3 pc = projector.pose.apply_inverse(p_surface);
    if (pc.z() <= 0.0) return 0.0;
    const Vec2 uv = projector.intrinsics.project(pc);
    if (!projector.intrinsics.contains(uv)) return 0.0;
    const double sx = static_cast<double>(pattern->texture.width) / projector.intrinsics.width;
    const double sy = static_cast<double>(pattern->texture.height) / projector.intrinsics.height;
    const double tex = pattern->sample((uv.x() + 0.5) * sx - 0.5, (uv.y() + 0.5) * sy - 0.5);
    if (tex <= 0.0) return 0.0;
    const double cos_surface = n.dot((projector_center - p).normalized());
    if (cos_surface <= 0.0) return 0.0;
    if (!visible(p, projector_center)) return 0.0;
    return scene.lighting().projector_intensity * tex * cos_surface;
  }

  float shade(const Ray& ray, const Hit& hit) const {
    const Lighting& L = scene.lighting();
    const Vec3 p = ray.origin + hit.t * ray.direction;
    Vec3 n = scene.mesh().face_normals()[hit.face];
    if (n.dot(ray.direction) > 0.0) n = -n;
    const Vec3 p_off = p + kShadowOffset * n;
    const double radiance = L.albedo * (L.ambient + area_light(p_off, n) + projector_term(p, p_off, n));
    return static_cast<float>(std::clamp(radiance, 0.0, 1.0));
  }
};

Ray primary_ray(const Camera& cam, int x, int y) {
  const Vec3 d = cam.pose.rotation * cam.intrinsics.pixel_direction(x, y);
  return {cam.pose.translation, d.normalized(), 0.0, std::numeric_limits<double>::infinity()};
}

}  // namespace

GrayImage render_view(const Scene& scene, const Camera& camera, const Camera& projector,
                      const SpecklePattern* pattern, int workers) {
  camera.intrinsics.validate();
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  GrayImage image(w, h, 0.0f);
  if (scene.empty()) return image;
  const Shader shader(scene, projector, pattern);
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    float* out = image.row(y);
    for (int x = 0; x < w; ++x) {
      const Ray ray = primary_ray(camera, x, y);
      if (auto hit = scene.bvh().intersect(ray)) out[x] = shader.shade(ray, *hit);
    }
  });
  return image;
}

StereoImages render_stereo(const Scene& scene, const StereoRig& rig, const SpecklePattern& pattern,
                           int workers) {
  rig.validate();
  const Camera projector = rig.projector();
  return {render_view(scene, rig.left(), projector, &pattern, workers),
          render_view(scene, rig.right(), projector, &pattern, workers)};
}

DepthMap render_clean_depth(const Scene& scene, const Camera& camera, int workers) {
  camera.intrinsics.validate();
  const int w = camera.intrinsics.width, h = camera.intrinsics.height;
  DepthMap depth(w, h);
  if (scene.empty()) return depth;
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      const Ray ray = primary_ray(camera, x, y);
      if (auto hit = scene.bvh().intersect(ray)) {
        const Vec3 p = ray.origin + hit->t * ray.direction;
        const double z = camera.pose.apply_inverse(p).z();
        if (z > 0.0) depth.set(x, y, z);
      }
    }
  });
  return depth;
}

}  // namespace stereosynth
