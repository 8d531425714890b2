#pragma once

#include "stereosynth/pointcloud.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stereosynth {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kFeatureDim = 64;
inline constexpr int kClassifierPoints = 1024;
inline constexpr char kFeatureSpec[] = "handcrafted-v1 points=1024 knn=8 dim=64";

/// FPS down to `n` points (start index 0) when larger, then unit-ball normalization.
PointCloud prepare_for_classification(const PointCloud& pc, std::size_t n = kClassifierPoints);

/// Rotation-about-z invariant descriptor of a unit-ball normalized cloud:
/// covariance eigenvalue ratios, radial / height / planar-radius histograms,
/// k-NN spacing statistics per radial shell and z moments.
Vector extract_features(const PointCloud& pc);

/// Row i = extract_features(prepare_for_classification(clouds[i])).
Matrix extract_feature_matrix(const std::vector<PointCloud>& clouds, int workers = 1);

/// Features with hard labels (labels in [0, K)).
struct LabeledFeatures {
  Matrix features;  // n × D
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

LabeledFeatures make_labeled_features(const std::vector<PointCloud>& clouds, int num_classes,
                                      int workers = 1);

/// Precomputed mixed samples with soft targets.
struct MixupPool {
  Matrix features;  // m × D
  Matrix targets;   // m × K, rows sum to 1
  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

/// One mixed cloud per source sample, partnered with a seeded random other
/// sample; λ ~ U[0, 1).
MixupPool build_mixup_pool(const std::vector<PointCloud>& clouds, int num_classes,
                           std::uint64_t seed, int workers = 1);

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 5e-5;
  int batch_size = 16;
  int epochs = 200;
  bool cosine_schedule = true;
  double init_std = 0.01;
  std::uint64_t seed = 0;
  /// Self-training rounds may see only some classes.
  bool allow_missing_classes = false;

  void validate() const;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  bool mixup = false;
  std::vector<double> loss_curve;  // full-data loss after each epoch
  double train_accuracy = 0.0;
};

/// Standardization followed by a linear softmax head.
struct ClassifierModel {
  std::string feature_spec = kFeatureSpec;
  int num_classes = 0;
  int dim = 0;
  Vector mean;      // D
  Vector scale;     // D, positive
  Matrix weights;   // D × K
  Vector bias;      // K
  TrainingMeta meta;

  void validate() const;
  Matrix standardize(const Matrix& features) const;
  Matrix logits(const Matrix& features) const;
  /// n × K row-stochastic matrix.
  Matrix predict_proba(const Matrix& features) const;
};

/// Row-wise softmax, max-shifted.
Matrix softmax_rows(const Matrix& logits);

/// Mean soft-label cross-entropy of the head on standardized inputs `z`
/// (n × D) and targets (n × K). Gradients are optional and exclude weight decay.
double head_loss(const Matrix& weights, const Vector& bias, const Matrix& z, const Matrix& targets,
                 Matrix* grad_weights = nullptr, Vector* grad_bias = nullptr);

/// Model with standardization fitted to `features` and seeded Gaussian weights.
ClassifierModel initialize_model(const Matrix& features, int num_classes, const TrainConfig& cfg);

/// Adam mini-batch training. With a pool, every batch is extended by the
/// same number of pool rows. Throws on a missing class or non-finite loss.
ClassifierModel train(const LabeledFeatures& data, const TrainConfig& cfg,
                      const MixupPool* mixup = nullptr);

Vector predict_proba(const ClassifierModel& model, const PointCloud& pc);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes without samples
  Eigen::MatrixXi confusion;               // rows true, columns predicted
  std::size_t count = 0;
};

Evaluation evaluate_probabilities(const Matrix& probabilities, const std::vector<int>& labels);
Evaluation evaluate(const ClassifierModel& model, const LabeledFeatures& data);

void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace stereosynth
