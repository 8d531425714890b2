#include "stereosynth/geometry.hpp"

#include <cmath>
#include <numbers>

namespace stereosynth {
namespace {

constexpr double kPi = std::numbers::pi;

// Flips any face whose normal points toward the origin. Valid for the
// star-shaped primitives generated here.
std::vector<Face> orient_outward(const std::vector<Vec3>& v, std::vector<Face> faces) {
  for (auto& f : faces) {
    Vec3 n = (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]);
    Vec3 c = (v[f[0]] + v[f[1]] + v[f[2]]) / 3.0;
    if (n.dot(c) < 0.0) std::swap(f[1], f[2]);
  }
  return faces;
}

}  // namespace

TriangleMesh make_box(const Vec3& size) {
  const Vec3 h = 0.5 * size;
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) {
    v.emplace_back((i & 1) ? h.x() : -h.x(), (i & 2) ? h.y() : -h.y(), (i & 4) ? h.z() : -h.z());
  }
  std::vector<Face> f = {
      {0, 2, 1}, {1, 2, 3},  // z-
      {4, 5, 6}, {5, 7, 6},  // z+
      {0, 1, 4}, {1, 5, 4},  // y-
      {2, 6, 3}, {3, 6, 7},  // y+
      {0, 4, 2}, {2, 4, 6},  // x-
      {1, 3, 5}, {3, 7, 5},  // x+
  };
  auto oriented = orient_outward(v, std::move(f));
  return TriangleMesh::build(std::move(v), std::move(oriented));
}

TriangleMesh make_ellipsoid(const Vec3& radii, int lon, int lat) {
  if (lon < 3 || lat < 2) throw Error("make_ellipsoid: too few segments");
  std::vector<Vec3> v;
  v.emplace_back(0.0, 0.0, radii.z());
  for (int i = 1; i < lat; ++i) {
    const double theta = kPi * i / lat;
    for (int j = 0; j < lon; ++j) {
      const double phi = 2.0 * kPi * j / lon;
      v.emplace_back(radii.x() * std::sin(theta) * std::cos(phi),
                     radii.y() * std::sin(theta) * std::sin(phi), radii.z() * std::cos(theta));
    }
  }
  v.emplace_back(0.0, 0.0, -radii.z());
  const auto ring = [lon](int i, int j) -> std::uint32_t {
    return static_cast<std::uint32_t>(1 + (i - 1) * lon + ((j % lon) + lon) % lon);
  };
  const auto south = static_cast<std::uint32_t>(v.size() - 1);
  std::vector<Face> f;
  for (int j = 0; j < lon; ++j) f.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i + 1 < lat; ++i) {
    for (int j = 0; j < lon; ++j) {
      f.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      f.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
    }
  }
  for (int j = 0; j < lon; ++j) f.push_back({south, ring(lat - 1, j + 1), ring(lat - 1, j)});
  auto oriented = orient_outward(v, std::move(f));
  return TriangleMesh::build(std::move(v), std::move(oriented));
}

TriangleMesh make_uv_sphere(double radius, int lon, int lat) {
  return make_ellipsoid(Vec3::Constant(radius), lon, lat);
}

TriangleMesh make_cylinder(double radius, double height, int segments) {
  if (segments < 3) throw Error("make_cylinder: too few segments");
  const double hz = 0.5 * height;
  std::vector<Vec3> v;
  for (int j = 0; j < segments; ++j) {
    const double phi = 2.0 * kPi * j / segments;
    v.emplace_back(radius * std::cos(phi), radius * std::sin(phi), -hz);
  }
  for (int j = 0; j < segments; ++j) {
    const double phi = 2.0 * kPi * j / segments;
    v.emplace_back(radius * std::cos(phi), radius * std::sin(phi), hz);
  }
  const auto bottom_c = static_cast<std::uint32_t>(v.size());
  v.emplace_back(0.0, 0.0, -hz);
  const auto top_c = static_cast<std::uint32_t>(v.size());
  v.emplace_back(0.0, 0.0, hz);
  const auto n = static_cast<std::uint32_t>(segments);
  std::vector<Face> f;
  for (std::uint32_t j = 0; j < n; ++j) {
    const std::uint32_t k = (j + 1) % n;
    f.push_back({j, k, n + k});
    f.push_back({j, n + k, n + j});
    f.push_back({bottom_c, k, j});
    f.push_back({top_c, n + j, n + k});
  }
  auto oriented = orient_outward(v, std::move(f));
  return TriangleMesh::build(std::move(v), std::move(oriented));
}

TriangleMesh make_cone(double radius, double height, int segments) {
  if (segments < 3) throw Error("make_cone: too few segments");
  const double hz = 0.5 * height;
  std::vector<Vec3> v;
  for (int j = 0; j < segments; ++j) {
    const double phi = 2.0 * kPi * j / segments;
    v.emplace_back(radius * std::cos(phi), radius * std::sin(phi), -hz);
  }
  const auto base_c = static_cast<std::uint32_t>(v.size());
  v.emplace_back(0.0, 0.0, -hz);
  const auto apex = static_cast<std::uint32_t>(v.size());
  v.emplace_back(0.0, 0.0, hz);
  const auto n = static_cast<std::uint32_t>(segments);
  std::vector<Face> f;
  for (std::uint32_t j = 0; j < n; ++j) {
    const std::uint32_t k = (j + 1) % n;
    f.push_back({j, k, apex});
    f.push_back({base_c, k, j});
  }
  // Centroid-based orientation fails for the flat base of a tall cone, so the
  // winding above is already outward; no orient_outward pass here.
  return TriangleMesh::build(std::move(v), std::move(f));
}

TriangleMesh make_rectangle(double size_x, double size_y, double z) {
  const double hx = 0.5 * size_x, hy = 0.5 * size_y;
  std::vector<Vec3> v = {{-hx, -hy, z}, {hx, -hy, z}, {hx, hy, z}, {-hx, hy, z}};
  std::vector<Face> f = {{0, 1, 2}, {0, 2, 3}};
  return TriangleMesh::build(std::move(v), std::move(f));
}

}  // namespace stereosynth
