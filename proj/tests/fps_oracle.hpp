#pragma once

#include "stereosynth/common.hpp"

#include <limits>
#include <span>
#include <vector>

// O(N^2 n) farthest-point reference: at every step scan all unselected
// points, recompute the distance to every selected point, and keep the
// first index with the largest minimum.
inline std::vector<std::size_t> brute_force_fps(std::span<const stereosynth::Vec3> pts, std::size_t n,
                                                std::size_t start) {
  std::vector<std::size_t> chosen{start};
  std::vector<bool> taken(pts.size(), false);
  taken[start] = true;
  while (chosen.size() < n) {
    std::size_t best_i = pts.size();
    double best = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (taken[i]) continue;
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t s : chosen) {
        const double dx = pts[i].x() - pts[s].x();
        const double dy = pts[i].y() - pts[s].y();
        const double dz = pts[i].z() - pts[s].z();
        m = std::min(m, dx * dx + dy * dy + dz * dz);
      }
      if (m > best) {
        best = m;
        best_i = i;
      }
    }
    chosen.push_back(best_i);
    taken[best_i] = true;
  }
  return chosen;
}
