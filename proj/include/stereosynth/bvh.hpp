#pragma once

#include "stereosynth/geometry.hpp"

#include <optional>

namespace stereosynth {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_min = 0.0;
  double t_max = std::numeric_limits<double>::infinity();
};

struct Hit {
  double t = 0.0;
  std::uint32_t face = 0;
  double u = 0.0;  // barycentric weight of vertex 1
  double v = 0.0;  // barycentric weight of vertex 2
};

/// Bounding volume hierarchy over the faces of a mesh, built with binned SAH.
/// Holds a copy of the triangle data it needs, so it outlives the mesh.
class Bvh {
 public:
  Bvh() = default;
  explicit Bvh(const TriangleMesh& mesh, int max_leaf_size = 4);

  /// Nearest hit with t in (t_min, t_max).
  std::optional<Hit> intersect(const Ray& ray) const;
  /// Any hit with t in (t_min, t_max).
  bool occluded(const Ray& ray) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const;
  std::size_t triangle_count() const { return tris_.size(); }
  Aabb bounds() const { return nodes_.empty() ? Aabb{} : nodes_.front().box; }

 private:
  struct Node {
    Aabb box;
    // Interior: `first` is the right child, left child is the next node.
    // Leaf: triangles [first, first + count) of `tris_`.
    std::uint32_t first = 0;
    std::uint32_t count = 0;
  };
  struct Tri {
    Vec3 v0, e1, e2;
    std::uint32_t face;
  };

  std::uint32_t build(std::vector<std::uint32_t>& order, std::vector<Aabb>& boxes,
                      std::vector<Vec3>& centroids, std::uint32_t begin, std::uint32_t end,
                      int max_leaf_size);
  template <bool AnyHit>
  std::optional<Hit> traverse(const Ray& ray) const;

  std::vector<Node> nodes_;
  std::vector<Tri> tris_;
};

}  // namespace stereosynth
