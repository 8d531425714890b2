#include "stereosynth/classify.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace stereosynth {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error("TrainConfig: learning_rate must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw Error("TrainConfig: weight_decay must be non-negative");
  if (batch_size < 1) throw Error("TrainConfig: batch_size must be positive");
  if (epochs < 0) throw Error("TrainConfig: epochs must be non-negative");
  if (!(init_std >= 0.0)) throw Error("TrainConfig: init_std must be non-negative");
}

void ClassifierModel::validate() const {
  if (num_classes < 1 || dim < 1) throw Error("ClassifierModel: empty model");
  if (mean.size() != dim || scale.size() != dim || weights.rows() != dim ||
      weights.cols() != num_classes || bias.size() != num_classes) {
    throw Error("ClassifierModel: inconsistent dimensions");
  }
  if ((scale.array() <= 0.0).any()) throw Error("ClassifierModel: scale must be positive");
}

Matrix ClassifierModel::standardize(const Matrix& features) const {
  if (features.cols() != dim) {
    throw Error("feature dimension mismatch: model expects " + std::to_string(dim) + ", got " +
                std::to_string(features.cols()));
  }
  return (features.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix ClassifierModel::logits(const Matrix& features) const {
  return (standardize(features) * weights).rowwise() + bias.transpose();
}

Matrix ClassifierModel::predict_proba(const Matrix& features) const {
  return softmax_rows(logits(features));
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

double head_loss(const Matrix& weights, const Vector& bias, const Matrix& z, const Matrix& targets,
                 Matrix* grad_weights, Vector* grad_bias) {
  const Eigen::Index n = z.rows();
  if (n == 0) throw Error("head_loss: empty batch");
  Matrix logits = (z * weights).rowwise() + bias.transpose();
  const Vector row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  const Vector log_norm = logits.array().exp().rowwise().sum().log();
  const Matrix log_p = logits.colwise() - log_norm;
  const double loss = -(targets.array() * log_p.array()).sum() / static_cast<double>(n);
  if (grad_weights || grad_bias) {
    // Targets are distributions, so d loss / d logits = p - t.
    const Matrix delta = (log_p.array().exp().matrix() - targets) / static_cast<double>(n);
    if (grad_weights) *grad_weights = z.transpose() * delta;
    if (grad_bias) *grad_bias = delta.colwise().sum().transpose();
  }
  return loss;
}

ClassifierModel initialize_model(const Matrix& features, int num_classes, const TrainConfig& cfg) {
  cfg.validate();
  if (features.rows() == 0) throw Error("initialize_model: no samples");
  if (num_classes < 1) throw Error("initialize_model: num_classes must be positive");
  ClassifierModel m;
  m.num_classes = num_classes;
  m.dim = static_cast<int>(features.cols());
  m.mean = features.colwise().mean().transpose();
  const Matrix centred = features.rowwise() - m.mean.transpose();
  m.scale = (centred.array().square().colwise().sum() / static_cast<double>(features.rows())).sqrt().transpose();
  for (Eigen::Index i = 0; i < m.scale.size(); ++i) {
    if (!(m.scale[i] > 1e-9)) m.scale[i] = 1.0;
  }
  Rng rng(derive_seed(cfg.seed, "init"));
  std::normal_distribution<double> g(0.0, 1.0);
  m.weights.resize(m.dim, num_classes);
  for (Eigen::Index c = 0; c < m.weights.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.weights.rows(); ++r) m.weights(r, c) = cfg.init_std * g(rng);
  }
  m.bias = Vector::Zero(num_classes);
  m.meta.seed = cfg.seed;
  return m;
}

namespace {

Matrix one_hot(const std::vector<int>& labels, int k) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), k);
  for (std::size_t i = 0; i < labels.size(); ++i) t(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  return t;
}

struct Adam {
  Matrix m_w, v_w;
  Vector m_b, v_b;
  long step = 0;
  static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  Adam(Eigen::Index d, Eigen::Index k)
      : m_w(Matrix::Zero(d, k)), v_w(Matrix::Zero(d, k)), m_b(Vector::Zero(k)), v_b(Vector::Zero(k)) {}

  void update(Matrix& w, Vector& b, const Matrix& gw, const Vector& gb, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    m_w = beta1 * m_w + (1.0 - beta1) * gw;
    v_w = beta2 * v_w + (1.0 - beta2) * gw.cwiseProduct(gw);
    m_b = beta1 * m_b + (1.0 - beta1) * gb;
    v_b = beta2 * v_b + (1.0 - beta2) * gb.cwiseProduct(gb);
    w.array() -= lr * (m_w.array() / c1) / ((v_w.array() / c2).sqrt() + eps);
    b.array() -= lr * (m_b.array() / c1) / ((v_b.array() / c2).sqrt() + eps);
  }
};

}  // namespace

ClassifierModel train(const LabeledFeatures& data, const TrainConfig& cfg, const MixupPool* mixup) {
  cfg.validate();
  data.validate();
  const int k = data.num_classes;
  std::vector<int> present(static_cast<std::size_t>(k), 0);
  for (int y : data.labels) present[static_cast<std::size_t>(y)] = 1;
  for (int c = 0; c < k && !cfg.allow_missing_classes; ++c) {
    if (!present[static_cast<std::size_t>(c)]) throw Error("train: class " + std::to_string(c) + " absent from data");
  }
  if (mixup && mixup->size() > 0) {
    if (mixup->features.cols() != data.features.cols() || mixup->targets.cols() != k) {
      throw Error("train: mixup pool dimensions do not match the data");
    }
  }

  ClassifierModel model = initialize_model(data.features, k, cfg);
  model.meta.epochs = cfg.epochs;
  model.meta.mixup = mixup && mixup->size() > 0;
  const Matrix z = model.standardize(data.features);
  const Matrix targets = one_hot(data.labels, k);
  Matrix pool_z, pool_t;
  if (model.meta.mixup) {
    pool_z = model.standardize(mixup->features);
    pool_t = mixup->targets;
  }

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(cfg.seed, "shuffle"));
  Rng pool_rng(derive_seed(cfg.seed, "mixup"));
  Adam adam(model.dim, k);
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  Matrix gw;
  Vector gb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.cosine_schedule
                          ? 0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs))
                          : cfg.learning_rate;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      const std::size_t extra = model.meta.mixup ? count : 0;
      Matrix bz(static_cast<Eigen::Index>(count + extra), model.dim);
      Matrix bt(static_cast<Eigen::Index>(count + extra), k);
      for (std::size_t i = 0; i < count; ++i) {
        bz.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(order[start + i]));
        bt.row(static_cast<Eigen::Index>(i)) = targets.row(static_cast<Eigen::Index>(order[start + i]));
      }
      if (extra > 0) {
        std::uniform_int_distribution<Eigen::Index> pick(0, pool_z.rows() - 1);
        for (std::size_t i = 0; i < extra; ++i) {
          const Eigen::Index r = pick(pool_rng);
          bz.row(static_cast<Eigen::Index>(count + i)) = pool_z.row(r);
          bt.row(static_cast<Eigen::Index>(count + i)) = pool_t.row(r);
        }
      }
      head_loss(model.weights, model.bias, bz, bt, &gw, &gb);
      gw += cfg.weight_decay * model.weights;
      adam.update(model.weights, model.bias, gw, gb, lr);
    }
    const double loss = head_loss(model.weights, model.bias, z, targets);
    if (!std::isfinite(loss)) {
      throw Error("train: diverged (non-finite loss) at epoch " + std::to_string(epoch));
    }
    model.meta.loss_curve.push_back(loss);
  }
  model.meta.train_accuracy = evaluate(model, data).accuracy;
  return model;
}

Vector predict_proba(const ClassifierModel& model, const PointCloud& pc) {
  const Vector f = extract_features(prepare_for_classification(pc));
  return model.predict_proba(f.transpose()).row(0).transpose();
}

Evaluation evaluate_probabilities(const Matrix& probabilities, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(probabilities.rows()) != labels.size()) {
    throw Error("evaluate: probability rows do not match label count");
  }
  const auto k = static_cast<int>(probabilities.cols());
  Evaluation e;
  e.count = labels.size();
  e.confusion = Eigen::MatrixXi::Zero(k, k);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) throw Error("evaluate: label out of range");
    Eigen::Index pred = 0;
    probabilities.row(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
    e.confusion(labels[i], pred) += 1;
    if (pred == labels[i]) ++correct;
  }
  e.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
  for (int c = 0; c < k; ++c) {
    const int total = e.confusion.row(c).sum();
    e.per_class_accuracy.push_back(total > 0 ? static_cast<double>(e.confusion(c, c)) / total
                                             : std::numeric_limits<double>::quiet_NaN());
  }
  return e;
}

Evaluation evaluate(const ClassifierModel& model, const LabeledFeatures& data) {
  if (data.num_classes != model.num_classes) throw Error("evaluate: class count mismatch");
  return evaluate_probabilities(model.predict_proba(data.features), data.labels);
}

}  // namespace stereosynth
