#pragma once

#include "stereosynth/classify.hpp"

#include <array>

// Four Gaussian clusters in feature space. The source is balanced; the
// target is shifted, slightly rescaled and drawn with class mix 70/15/10/5.
struct GaussianTask {
  stereosynth::LabeledFeatures source;
  stereosynth::Matrix target;
  std::vector<int> target_labels;
};

inline GaussianTask make_gaussian_task(std::uint64_t seed, int dim = 16, int source_per_class = 100,
                                       int target_size = 1000, double shift = 0.8) {
  using namespace stereosynth;
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vector> means;
  for (int k = 0; k < 4; ++k) {
    Vector m = Vector::Zero(dim);
    m[k] = 3.0;
    m[(k + 1) % 4] = 1.0;
    means.push_back(m);
  }
  GaussianTask t;
  t.source.num_classes = 4;
  t.source.features.resize(4 * source_per_class, dim);
  for (int k = 0; k < 4; ++k) {
    for (int i = 0; i < source_per_class; ++i) {
      const int r = k * source_per_class + i;
      for (int j = 0; j < dim; ++j) t.source.features(r, j) = means[static_cast<std::size_t>(k)][j] + g(rng);
      t.source.labels.push_back(k);
    }
  }
  const std::array<double, 4> mix = {0.70, 0.15, 0.10, 0.05};
  Vector offset(dim);
  for (int j = 0; j < dim; ++j) offset[j] = shift * g(rng) / std::sqrt(4.0);
  t.target.resize(target_size, dim);
  int r = 0;
  for (int k = 0; k < 4; ++k) {
    const int count = k == 3 ? target_size - r : static_cast<int>(mix[static_cast<std::size_t>(k)] * target_size);
    for (int i = 0; i < count; ++i, ++r) {
      for (int j = 0; j < dim; ++j) {
        t.target(r, j) = 1.15 * (means[static_cast<std::size_t>(k)][j] + g(rng)) + offset[j];
      }
      t.target_labels.push_back(k);
    }
  }
  return t;
}
