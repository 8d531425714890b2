#include "stereosynth/pointcloud.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace stereosynth {

Vec3 PointCloud::centroid() const {
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
}

PointCloud fuse_views(std::span<const PointCloud> clouds) {
  PointCloud fused;
  std::size_t total = 0;
  for (const auto& c : clouds) total += c.size();
  if (total == 0) throw Error("fuse_views: all input clouds are empty");
  fused.points.reserve(total);
  for (const auto& c : clouds) fused.points.insert(fused.points.end(), c.points.begin(), c.points.end());
  return fused;
}

std::vector<std::size_t> farthest_point_indices(std::span<const Vec3> points, std::size_t n,
                                                std::size_t start) {
  const std::size_t N = points.size();
  if (n < 1 || n > N) {
    throw Error("farthest_point_sample: requested " + std::to_string(n) + " of " +
                std::to_string(N) + " points");
  }
  if (start >= N) throw Error("farthest_point_sample: start index out of range");
  std::vector<std::size_t> selected;
  selected.reserve(n);
  std::vector<double> min_d2(N, std::numeric_limits<double>::infinity());
  std::size_t current = start;
  for (std::size_t k = 0; k < n; ++k) {
    selected.push_back(current);
    min_d2[current] = -1.0;  // never re-selected, even among duplicates
    const Vec3& c = points[current];
    std::size_t next = 0;
    double best = -0.5;
    for (std::size_t i = 0; i < N; ++i) {
      const double dx = points[i].x() - c.x();
      const double dy = points[i].y() - c.y();
      const double dz = points[i].z() - c.z();
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (d2 < min_d2[i] && min_d2[i] >= 0.0) min_d2[i] = d2;
      if (min_d2[i] > best) {
        best = min_d2[i];
        next = i;
      }
    }
    current = next;
  }
  return selected;
}

PointCloud farthest_point_sample_from(const PointCloud& cloud, std::size_t n, std::size_t start) {
  const auto idx = farthest_point_indices(cloud.points, n, start);
  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(idx.size());
  for (auto i : idx) out.points.push_back(cloud.points[i]);
  return out;
}

PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (cloud.empty()) throw Error("farthest_point_sample: empty cloud");
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  return farthest_point_sample_from(cloud, n, pick(rng));
}

PointCloud normalize_unit_ball(const PointCloud& cloud) {
  if (cloud.empty()) throw Error("normalize_unit_ball: empty cloud");
  const Vec3 c = cloud.centroid();
  double max_norm = 0.0;
  for (const auto& p : cloud.points) max_norm = std::max(max_norm, (p - c).norm());
  if (!(max_norm > 0.0)) throw Error("normalize_unit_ball: all points coincide");
  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back((p - c) / max_norm);
  return out;
}

PointCloud augment(const PointCloud& cloud, Rng& rng, const AugmentParams& params) {
  PointCloud out = cloud;
  if (params.rotate) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double a = angle(rng);
    const double c = std::cos(a), s = std::sin(a);
    for (auto& p : out.points) p = Vec3(c * p.x() - s * p.y(), s * p.x() + c * p.y(), p.z());
  }
  if (params.jitter) {
    std::normal_distribution<double> noise(0.0, params.jitter_sigma);
    for (auto& p : out.points) {
      for (int a = 0; a < 3; ++a) p[a] += std::clamp(noise(rng), -params.jitter_clip, params.jitter_clip);
    }
  }
  return out;
}

PointCloud region_dropout(const PointCloud& cloud, Rng& rng, double drop_fraction) {
  if (!(drop_fraction > 0.0 && drop_fraction < 1.0)) {
    throw Error("region_dropout: drop_fraction must lie in (0, 1)");
  }
  if (cloud.empty()) throw Error("region_dropout: empty cloud");
  const std::size_t N = cloud.size();
  const auto drop = static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(N)));
  if (N - drop < 16) throw Error("region_dropout: fewer than 16 points would remain");
  if (drop == 0) return cloud;

  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  const Vec3 anchor = cloud.points[pick(rng)];
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> d2(N);
  for (std::size_t i = 0; i < N; ++i) d2[i] = (cloud.points[i] - anchor).squaredNorm();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d2[a] < d2[b]; });
  std::vector<std::uint8_t> removed(N, 0);
  for (std::size_t k = 0; k < drop; ++k) removed[order[k]] = 1;

  PointCloud out;
  out.label = cloud.label;
  out.points.reserve(N - drop);
  for (std::size_t i = 0; i < N; ++i) {
    if (!removed[i]) out.points.push_back(cloud.points[i]);
  }
  return out;
}

MixedSample mixup(const PointCloud& a, const PointCloud& b, double lambda, std::size_t n,
                  int num_classes, Rng& rng) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("mixup: lambda must lie in [0, 1]");
  if (!a.label || !b.label) throw Error("mixup: both clouds need labels");
  if (*a.label < 0 || *a.label >= num_classes || *b.label < 0 || *b.label >= num_classes) {
    throw Error("mixup: label out of range");
  }
  if (a.size() < n || b.size() < n) throw Error("mixup: insufficient points for n = " + std::to_string(n));
  const auto from_a = static_cast<std::size_t>(std::floor(lambda * static_cast<double>(n)));
  const std::size_t from_b = n - from_a;

  MixedSample out;
  out.cloud.points.reserve(n);
  if (from_a > 0) {
    auto pa = farthest_point_sample(a, from_a, rng);
    out.cloud.points.insert(out.cloud.points.end(), pa.points.begin(), pa.points.end());
  }
  if (from_b > 0) {
    auto pb = farthest_point_sample(b, from_b, rng);
    out.cloud.points.insert(out.cloud.points.end(), pb.points.begin(), pb.points.end());
  }
  out.soft_label.assign(static_cast<std::size_t>(num_classes), 0.0);
  out.soft_label[*a.label] += lambda;
  out.soft_label[*b.label] += 1.0 - lambda;
  return out;
}

}  // namespace stereosynth
