#include "stereosynth/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace stereosynth {

RigidPose RigidPose::inverse() const {
  RigidPose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidPose RigidPose::compose(const RigidPose& inner) const {
  RigidPose out;
  out.rotation = rotation * inner.rotation;
  out.translation = rotation * inner.translation + translation;
  return out;
}

bool RigidPose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  Mat3 gram = rotation.transpose() * rotation;
  if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

RigidPose RigidPose::look_at(const Vec3& eye, const Vec3& target, const Vec3& world_up) {
  Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(world_up);
  if (right.norm() < 1e-12) {
    // Looking straight along the up axis; pick any perpendicular.
    right = forward.cross(Vec3::UnitY());
    if (right.norm() < 1e-12) right = forward.cross(Vec3::UnitX());
  }
  right.normalize();
  Vec3 down = forward.cross(right);
  RigidPose pose;
  pose.rotation.col(0) = right;
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.translation = eye;
  return pose;
}

Mat3 rotation_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

Mat3 rotation_euler(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

TriangleMesh TriangleMesh::build(std::vector<Vec3> vertices, std::vector<Face> faces,
                                 std::size_t* dropped_faces) {
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw Error("mesh: non-finite vertex coordinate");
  }
  const auto n = vertices.size();
  for (const auto& f : faces) {
    for (auto idx : f) {
      if (idx >= n) throw Error("mesh: face index " + std::to_string(idx) + " out of range");
    }
  }

  Aabb box;
  for (const auto& v : vertices) box.extend(v);
  const double scale = box.empty() ? 0.0 : box.extent().maxCoeff();
  const double min_area = 1e-12 * scale * scale;

  std::vector<Face> kept;
  kept.reserve(faces.size());
  for (const auto& f : faces) {
    const Vec3& a = vertices[f[0]];
    const Vec3& b = vertices[f[1]];
    const Vec3& c = vertices[f[2]];
    const double area = 0.5 * (b - a).cross(c - a).norm();
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || !(area > min_area)) continue;
    kept.push_back(f);
  }
  if (dropped_faces) *dropped_faces = faces.size() - kept.size();

  TriangleMesh mesh;
  mesh.vertices_ = std::move(vertices);
  mesh.faces_ = std::move(kept);
  mesh.compute_normals();
  return mesh;
}

void TriangleMesh::compute_normals() {
  normals_.resize(faces_.size());
  for (std::size_t i = 0; i < faces_.size(); ++i) {
    const auto& f = faces_[i];
    const Vec3& a = vertices_[f[0]];
    normals_[i] = (vertices_[f[1]] - a).cross(vertices_[f[2]] - a).normalized();
  }
}

Aabb TriangleMesh::bounds() const {
  Aabb box;
  for (const auto& v : vertices_) box.extend(v);
  return box;
}

double TriangleMesh::face_area(std::size_t f) const {
  const auto& idx = faces_[f];
  const Vec3& a = vertices_[idx[0]];
  return 0.5 * (vertices_[idx[1]] - a).cross(vertices_[idx[2]] - a).norm();
}

double TriangleMesh::surface_area() const {
  double total = 0.0;
  for (std::size_t f = 0; f < faces_.size(); ++f) total += face_area(f);
  return total;
}

TriangleMesh normalize_to_unit_cube(const TriangleMesh& mesh) {
  if (mesh.vertex_count() == 0) throw Error("normalize_to_unit_cube: empty mesh");
  const Aabb box = mesh.bounds();
  const double side = box.extent().maxCoeff();
  if (!(side > 0.0)) throw Error("normalize_to_unit_cube: mesh has zero extent");
  const Vec3 center = box.center();
  const double s = 1.0 / side;
  return mesh.transformed([&](const Vec3& v) -> Vec3 { return (v - center) * s; });
}

TriangleMesh random_z_rotation(const TriangleMesh& mesh, Rng& rng, double* angle_out) {
  std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * std::numbers::pi);
  const double angle = angle_dist(rng);
  if (angle_out) *angle_out = angle;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  // Explicit form keeps z bit-exact.
  return mesh.transformed([&](const Vec3& v) -> Vec3 {
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
  });
}

}  // namespace stereosynth
