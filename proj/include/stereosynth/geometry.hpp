#pragma once

#include "stereosynth/common.hpp"

#include <array>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace stereosynth {

/// Rotation + translation mapping a local frame into the world:
/// x_world = rotation * x_local + translation.
struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_inverse(const Vec3& p) const { return rotation.transpose() * (p - translation); }
  RigidPose inverse() const;
  RigidPose compose(const RigidPose& inner) const;  // this ∘ inner

  /// Orthonormal with det +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;

  /// Camera pose (x right, y down, z forward) at `eye` looking at `target`,
  /// with image "up" aligned to `world_up` as far as possible.
  static RigidPose look_at(const Vec3& eye, const Vec3& target,
                           const Vec3& world_up = Vec3::UnitZ());
};

/// Rotation about z.
Mat3 rotation_z(double angle);
/// Intrinsic X-Y-Z Euler rotation: Rz(yaw) * Ry(pitch) * Rx(roll).
Mat3 rotation_euler(double roll, double pitch, double yaw);

using Face = std::array<std::uint32_t, 3>;

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  bool empty() const { return (max.array() < min.array()).any(); }
  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double surface_area() const {
    if (empty()) return 0.0;
    Vec3 e = extent();
    return 2.0 * (e.x() * e.y() + e.y() * e.z() + e.z() * e.x());
  }
};

/// Indexed triangle surface. Construct through `TriangleMesh::build`, which
/// enforces finiteness, index bounds and non-degeneracy.
class TriangleMesh {
 public:
  TriangleMesh() = default;

  /// Validates input and drops faces whose area is below 1e-12 relative to
  /// the squared longest bounding-box side. Throws on non-finite vertices or
  /// out-of-range indices.
  static TriangleMesh build(std::vector<Vec3> vertices, std::vector<Face> faces,
                            std::size_t* dropped_faces = nullptr);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Vec3>& face_normals() const { return normals_; }

  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t face_count() const { return faces_.size(); }
  bool empty() const { return faces_.empty(); }

  Aabb bounds() const;
  double face_area(std::size_t f) const;
  double surface_area() const;

  /// Same topology, vertices mapped by `fn`. Normals are recomputed.
  template <class Fn>
  TriangleMesh transformed(Fn&& fn) const {
    TriangleMesh out = *this;
    for (auto& v : out.vertices_) v = fn(v);
    out.compute_normals();
    return out;
  }

 private:
  void compute_normals();

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Vec3> normals_;
};

struct MeshLoadReport {
  std::size_t dropped_faces = 0;
  std::size_t triangulated_quads = 0;
};

/// Reads an OBJ (v/f records; quads fan-triangulated) or ASCII PLY mesh.
TriangleMesh load_mesh(const std::filesystem::path& path, MeshLoadReport* report = nullptr);

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Uniform scale + translation so the bounding box is centred at the origin
/// with its longest side equal to 1.
TriangleMesh normalize_to_unit_cube(const TriangleMesh& mesh);

/// Rotation about the world z axis by an angle drawn from U[0, 2π).
TriangleMesh random_z_rotation(const TriangleMesh& mesh, Rng& rng, double* angle_out = nullptr);

// Primitive generators. All are closed, outward-wound and centred at the origin.
TriangleMesh make_box(const Vec3& size);
TriangleMesh make_uv_sphere(double radius, int longitude_segments, int latitude_segments);
TriangleMesh make_ellipsoid(const Vec3& radii, int longitude_segments, int latitude_segments);
TriangleMesh make_cylinder(double radius, double height, int segments);
TriangleMesh make_cone(double radius, double height, int segments);
/// Axis-aligned rectangle in the plane z = `z`, normal +z.
TriangleMesh make_rectangle(double size_x, double size_y, double z);

}  // namespace stereosynth
