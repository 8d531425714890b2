#include "stereosynth/classify.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>

namespace stereosynth {
namespace {

constexpr int kRadialBins = 16;
constexpr int kHeightBins = 16;
constexpr int kShells = 4;
constexpr int kPlanarBins = 8;
constexpr int kNeighbours = 8;

int bin_of(double v, double lo, double hi, int bins) {
  const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
  return std::clamp(b, 0, bins - 1);
}

// Mean distance to the k nearest other points, brute force.
std::vector<double> knn_mean_distance(const std::vector<Vec3>& pts, int k) {
  const std::size_t n = pts.size();
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n - 1);
  std::vector<double> out(n, 0.0);
  if (kk == 0) return out;
  std::vector<double> best(kk);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d2 = (pts[i] - pts[j]).squaredNorm();
      if (d2 >= best.back()) continue;
      std::size_t pos = kk - 1;
      while (pos > 0 && best[pos - 1] > d2) {
        best[pos] = best[pos - 1];
        --pos;
      }
      best[pos] = d2;
    }
    double s = 0.0;
    for (double d2 : best) s += std::sqrt(d2);
    out[i] = s / static_cast<double>(kk);
  }
  return out;
}

}  // namespace

PointCloud prepare_for_classification(const PointCloud& pc, std::size_t n) {
  if (pc.empty()) throw Error("prepare_for_classification: empty cloud");
  if (pc.size() > n) return normalize_unit_ball(farthest_point_sample_from(pc, n, 0));
  return normalize_unit_ball(pc);
}

Vector extract_features(const PointCloud& pc) {
  const auto& pts = pc.points;
  const std::size_t n = pts.size();
  if (n < 2) throw Error("extract_features: need at least 2 points");
  for (const auto& p : pts) {
    if (!p.allFinite()) throw Error("extract_features: non-finite point");
  }

  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(n);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  cov /= static_cast<double>(n);
  const double trace = cov.trace();
  if (!(trace > 1e-18)) throw Error("extract_features: degenerate cloud (all points identical)");

  Vector f = Vector::Zero(kFeatureDim);
  int at = 0;

  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov, Eigen::EigenvaluesOnly);
  Vec3 ev = eig.eigenvalues().cwiseMax(0.0);
  std::sort(ev.data(), ev.data() + 3, std::greater<>());
  for (int i = 0; i < 3; ++i) f[at++] = ev[i] / trace;
  f[at++] = cov(2, 2) / trace;
  // Planar covariance eigenvalues are invariant to rotation about z.
  const double a = cov(0, 0), b = cov(1, 1), c = cov(0, 1);
  const double half_sum = 0.5 * (a + b);
  const double disc = std::sqrt(0.25 * (a - b) * (a - b) + c * c);
  const double mu1 = half_sum + disc, mu2 = std::max(0.0, half_sum - disc);
  f[at++] = mu1 > 0.0 ? mu2 / mu1 : 0.0;

  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> radius(n);
  const int radial_at = at;
  const int height_at = radial_at + kRadialBins;
  const int shell_at = height_at + kHeightBins;
  const int planar_at = shell_at + 4 * kShells;
  for (std::size_t i = 0; i < n; ++i) {
    radius[i] = pts[i].norm();
    f[radial_at + bin_of(radius[i], 0.0, 1.0, kRadialBins)] += inv_n;
    f[height_at + bin_of(pts[i].z(), -1.0, 1.0, kHeightBins)] += inv_n;
    const double planar = std::hypot(pts[i].x(), pts[i].y());
    f[planar_at + bin_of(planar, 0.0, 1.0, kPlanarBins)] += inv_n;
  }

  const auto spacing = knn_mean_distance(pts, kNeighbours);
  for (int s = 0; s < kShells; ++s) {
    double sum = 0.0, sum2 = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (bin_of(radius[i], 0.0, 1.0, kShells) != s) continue;
      sum += spacing[i];
      sum2 += spacing[i] * spacing[i];
      lo = std::min(lo, spacing[i]);
      hi = std::max(hi, spacing[i]);
      ++count;
    }
    const int base = shell_at + 4 * s;
    if (count == 0) continue;
    const double m = sum / static_cast<double>(count);
    f[base] = m;
    f[base + 1] = std::sqrt(std::max(0.0, sum2 / static_cast<double>(count) - m * m));
    f[base + 2] = lo;
    f[base + 3] = hi;
  }

  at = planar_at + kPlanarBins;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0, mean_r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dz = pts[i].z() - mean.z();
    m2 += dz * dz;
    m3 += dz * dz * dz;
    m4 += dz * dz * dz * dz;
    mean_r += radius[i];
  }
  m2 *= inv_n;
  m3 *= inv_n;
  m4 *= inv_n;
  f[at++] = m2 > 1e-12 ? m3 / std::pow(m2, 1.5) : 0.0;
  f[at++] = m2 > 1e-12 ? m4 / (m2 * m2) : 0.0;
  f[at++] = mean_r * inv_n;
  static_assert(5 + kRadialBins + kHeightBins + 4 * kShells + kPlanarBins + 3 == kFeatureDim);
  return f;
}

Matrix extract_feature_matrix(const std::vector<PointCloud>& clouds, int workers) {
  Matrix out(static_cast<Eigen::Index>(clouds.size()), kFeatureDim);
  parallel_for(clouds.size(), workers, [&](std::size_t i) {
    out.row(static_cast<Eigen::Index>(i)) = extract_features(prepare_for_classification(clouds[i])).transpose();
  });
  return out;
}

void LabeledFeatures::validate() const {
  if (num_classes < 1) throw Error("LabeledFeatures: num_classes must be positive");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error("LabeledFeatures: row count does not match label count");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw Error("LabeledFeatures: label out of range");
  }
  if (!features.allFinite()) throw Error("LabeledFeatures: non-finite feature");
}

LabeledFeatures make_labeled_features(const std::vector<PointCloud>& clouds, int num_classes,
                                      int workers) {
  LabeledFeatures out;
  out.num_classes = num_classes;
  for (const auto& c : clouds) {
    if (!c.label) throw Error("make_labeled_features: unlabeled cloud");
    out.labels.push_back(*c.label);
  }
  out.features = extract_feature_matrix(clouds, workers);
  out.validate();
  return out;
}

MixupPool build_mixup_pool(const std::vector<PointCloud>& clouds, int num_classes,
                           std::uint64_t seed, int workers) {
  if (clouds.size() < 2) throw Error("build_mixup_pool: need at least 2 clouds");
  const std::size_t n = clouds.size();
  std::vector<PointCloud> prepared(n);
  parallel_for(n, workers, [&](std::size_t i) {
    prepared[i] = prepare_for_classification(clouds[i]);
    if (!prepared[i].label) throw Error("build_mixup_pool: unlabeled cloud");
  });
  std::size_t points = prepared[0].size();
  for (const auto& p : prepared) points = std::min(points, p.size());

  MixupPool pool;
  pool.features.resize(static_cast<Eigen::Index>(n), kFeatureDim);
  pool.targets.resize(static_cast<Eigen::Index>(n), num_classes);
  parallel_for(n, workers, [&](std::size_t i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_int_distribution<std::size_t> other(0, n - 2);
    std::size_t j = other(rng);
    if (j >= i) ++j;
    const double lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    MixedSample m = mixup(prepared[i], prepared[j], lambda, points, num_classes, rng);
    const auto r = static_cast<Eigen::Index>(i);
    pool.features.row(r) = extract_features(normalize_unit_ball(m.cloud)).transpose();
    for (int k = 0; k < num_classes; ++k) pool.targets(r, k) = m.soft_label[static_cast<std::size_t>(k)];
  });
  return pool;
}

}  // namespace stereosynth
