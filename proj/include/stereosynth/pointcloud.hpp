#pragma once

#include "stereosynth/common.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace stereosynth {

struct PointCloud {
  std::vector<Vec3> points;
  std::optional<int> label;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  Vec3 centroid() const;
};

/// Concatenation of clouds already expressed in a common frame.
PointCloud fuse_views(std::span<const PointCloud> clouds);

/// Greedy farthest-point sampling from a fixed start index. Returns indices in
/// selection order; ties go to the lowest index.
std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> points, std::size_t n,
                                                std::size_t start);

/// FPS with the start index drawn uniformly from `rng`.
PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n, Rng& rng);
PointCloud farthest_point_sample_from(const PointCloud& cloud, std::size_t n, std::size_t start);

/// Centroid to the origin, then divide by the largest point norm.
PointCloud normalize_unit_ball(const PointCloud& cloud);

struct AugmentParams {
  bool rotate = true;
  bool jitter = true;
  double jitter_sigma = 0.01;
  double jitter_clip = 0.05;
};

/// Uniform rotation about z plus clipped per-axis Gaussian jitter.
PointCloud augment(const PointCloud& cloud, Rng& rng, const AugmentParams& params = {});

/// Removes the floor(drop_fraction·N) nearest neighbours of a seeded anchor
/// point (the anchor counts as its own nearest neighbour).
PointCloud region_dropout(const PointCloud& cloud, Rng& rng, double drop_fraction);

struct MixedSample {
  PointCloud cloud;
  std::vector<double> soft_label;
};

/// floor(λ·n) FPS points of `a` followed by n - floor(λ·n) FPS points of `b`;
/// soft label λ·onehot(a) + (1-λ)·onehot(b). Both clouds must be labeled.
MixedSample mixup(const PointCloud& a, const PointCloud& b, double lambda, std::size_t n,
                  int num_classes, Rng& rng);

// Interchange formats.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_ply(const std::filesystem::path& path);
/// Little-endian: uint32 count, then count×3 float32.
void write_cloud_binary(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_cloud_binary(const std::filesystem::path& path);

}  // namespace stereosynth
