#include "stereosynth/bvh.hpp"

#include <algorithm>
#include <array>

namespace stereosynth {
namespace {

constexpr int kBins = 12;

bool slab_test(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, double t_min,
               double t_max) {
  for (int a = 0; a < 3; ++a) {
    double t0 = (box.min[a] - origin[a]) * inv_dir[a];
    double t1 = (box.max[a] - origin[a]) * inv_dir[a];
    if (inv_dir[a] < 0.0) std::swap(t0, t1);
    // NaN from 0 * inf (origin on a slab plane, parallel ray) keeps the bounds.
    t_min = t0 > t_min ? t0 : t_min;
    t_max = t1 < t_max ? t1 : t_max;
    if (t_max < t_min) return false;
  }
  return true;
}

}  // namespace

Bvh::Bvh(const TriangleMesh& mesh, int max_leaf_size) {
  const auto n = static_cast<std::uint32_t>(mesh.face_count());
  if (n == 0) return;
  std::vector<std::uint32_t> order(n);
  std::vector<Aabb> boxes(n);
  std::vector<Vec3> centroids(n);
  const auto& v = mesh.vertices();
  for (std::uint32_t i = 0; i < n; ++i) {
    order[i] = i;
    const auto& f = mesh.faces()[i];
    for (auto idx : f) boxes[i].extend(v[idx]);
    centroids[i] = (v[f[0]] + v[f[1]] + v[f[2]]) / 3.0;
  }
  nodes_.reserve(2 * n);
  build(order, boxes, centroids, 0, n, std::max(1, max_leaf_size));

  tris_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto& f = mesh.faces()[order[i]];
    tris_[i] = {v[f[0]], v[f[1]] - v[f[0]], v[f[2]] - v[f[0]], order[i]};
  }
}

std::uint32_t Bvh::build(std::vector<std::uint32_t>& order, std::vector<Aabb>& boxes,
                         std::vector<Vec3>& centroids, std::uint32_t begin, std::uint32_t end,
                         int max_leaf_size) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({});
  Aabb box, cbox;
  for (std::uint32_t i = begin; i < end; ++i) {
    box.extend(boxes[order[i]]);
    cbox.extend(centroids[order[i]]);
  }
  nodes_[index].box = box;
  const std::uint32_t count = end - begin;

  auto make_leaf = [&] {
    nodes_[index].first = begin;
    nodes_[index].count = count;
    return index;
  };
  if (count <= static_cast<std::uint32_t>(max_leaf_size)) return make_leaf();

  // Binned SAH over the widest centroid axis.
  const Vec3 ext = cbox.extent();
  int axis = 0;
  if (ext.y() > ext[axis]) axis = 1;
  if (ext.z() > ext[axis]) axis = 2;
  if (!(ext[axis] > 0.0)) return make_leaf();

  std::array<Aabb, kBins> bin_box;
  std::array<std::uint32_t, kBins> bin_count{};
  const double scale = kBins / ext[axis];
  auto bin_of = [&](std::uint32_t tri) {
    int b = static_cast<int>((centroids[tri][axis] - cbox.min[axis]) * scale);
    return std::clamp(b, 0, kBins - 1);
  };
  for (std::uint32_t i = begin; i < end; ++i) {
    const int b = bin_of(order[i]);
    ++bin_count[b];
    bin_box[b].extend(boxes[order[i]]);
  }
  std::array<double, kBins - 1> cost{};
  Aabb acc;
  std::uint32_t acc_n = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    acc.extend(bin_box[b]);
    acc_n += bin_count[b];
    cost[b] = acc.surface_area() * acc_n;
  }
  acc = Aabb{};
  acc_n = 0;
  for (int b = kBins - 1; b > 0; --b) {
    acc.extend(bin_box[b]);
    acc_n += bin_count[b];
    cost[b - 1] += acc.surface_area() * acc_n;
  }
  const int split = static_cast<int>(std::min_element(cost.begin(), cost.end()) - cost.begin());
  const double leaf_cost = box.surface_area() * count;
  if (count <= 16u && cost[split] >= leaf_cost) return make_leaf();

  auto mid_it = std::partition(order.begin() + begin, order.begin() + end,
                               [&](std::uint32_t tri) { return bin_of(tri) <= split; });
  auto mid = static_cast<std::uint32_t>(mid_it - order.begin());
  if (mid == begin || mid == end) {
    mid = begin + count / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return centroids[a][axis] < centroids[b][axis];
                     });
  }
  build(order, boxes, centroids, begin, mid, max_leaf_size);
  const std::uint32_t right = build(order, boxes, centroids, mid, end, max_leaf_size);
  nodes_[index].first = right;
  nodes_[index].count = 0;
  return index;
}

std::size_t Bvh::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.count > 0; }));
}

template <bool AnyHit>
std::optional<Hit> Bvh::traverse(const Ray& ray) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_dir = ray.direction.cwiseInverse();
  double t_best = ray.t_max;
  std::optional<Hit> best;

  // Children are pushed nearer-first along the dominant ray axis.
  int axis = 0;
  ray.direction.cwiseAbs().maxCoeff(&axis);
  const double dir_sign = ray.direction[axis] >= 0.0 ? 1.0 : -1.0;

  std::uint32_t stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!slab_test(node.box, ray.origin, inv_dir, ray.t_min, t_best)) continue;
    if (node.count == 0) {
      const std::uint32_t self = static_cast<std::uint32_t>(&node - nodes_.data());
      const std::uint32_t left = self + 1;
      const std::uint32_t right = node.first;
      const bool left_first =
          dir_sign * nodes_[left].box.center()[axis] <= dir_sign * nodes_[right].box.center()[axis];
      if (top + 2 > 64) throw Error("bvh: traversal stack overflow");
      stack[top++] = left_first ? right : left;
      stack[top++] = left_first ? left : right;
      continue;
    }
    for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
      // Möller–Trumbore, two-sided.
      const Tri& tri = tris_[i];
      const Vec3 p = ray.direction.cross(tri.e2);
      const double det = tri.e1.dot(p);
      if (std::abs(det) < 1e-300) continue;
      const double inv_det = 1.0 / det;
      const Vec3 s = ray.origin - tri.v0;
      const double u = s.dot(p) * inv_det;
      if (u < 0.0 || u > 1.0) continue;
      const Vec3 q = s.cross(tri.e1);
      const double v = ray.direction.dot(q) * inv_det;
      if (v < 0.0 || u + v > 1.0) continue;
      const double t = tri.e2.dot(q) * inv_det;
      if (t <= ray.t_min || t >= t_best) continue;
      t_best = t;
      best = Hit{t, tri.face, u, v};
      if constexpr (AnyHit) return best;
    }
  }
  return best;
}

std::optional<Hit> Bvh::intersect(const Ray& ray) const { return traverse<false>(ray); }

bool Bvh::occluded(const Ray& ray) const { return traverse<true>(ray).has_value(); }

}  // namespace stereosynth
