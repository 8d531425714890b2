#include "stereosynth/adapt.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

namespace stereosynth {

std::string to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::qbst: return "qbst";
    case SelectionMethod::spst: return "spst";
    case SelectionMethod::cbst: return "cbst";
  }
  return "?";
}

SelectionMethod parse_selection_method(std::string_view name) {
  if (name == "qbst") return SelectionMethod::qbst;
  if (name == "spst") return SelectionMethod::spst;
  if (name == "cbst") return SelectionMethod::cbst;
  throw Error("unknown selection method '" + std::string(name) + "' (expected qbst, spst or cbst)");
}

void SelfTrainConfig::validate() const {
  if (!(theta_0 > 0.0 && theta_0 < 1.0)) throw Error("SelfTrainConfig: theta_0 must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw Error("SelfTrainConfig: epsilon must be non-negative");
  if (rounds < 0) throw Error("SelfTrainConfig: rounds must be non-negative");
  if (!(theta_0 + rounds * epsilon < 1.0)) throw Error("SelfTrainConfig: theta_0 + rounds * epsilon must stay below 1");
  if (epochs_per_round < 0) throw Error("SelfTrainConfig: epochs_per_round must be non-negative");
  if (!(inner_learning_rate > 0.0)) throw Error("SelfTrainConfig: inner_learning_rate must be positive");
  if (inner_batch_size < 1) throw Error("SelfTrainConfig: inner_batch_size must be positive");
  if (!(cbst_proportion > 0.0 && cbst_proportion <= 1.0)) throw Error("SelfTrainConfig: cbst_proportion must lie in (0, 1]");
}

std::vector<int> PseudoLabelSet::selected_counts() const {
  std::vector<int> c(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < size(); ++i) {
    if (selected[i]) ++c[static_cast<std::size_t>(label[i])];
  }
  return c;
}

std::size_t PseudoLabelSet::selected_total() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

PseudoLabelSet generate_pseudo_labels(const Matrix& probabilities, double theta) {
  PseudoLabelSet pls;
  pls.num_classes = static_cast<int>(probabilities.cols());
  pls.theta = theta;
  pls.class_counts.assign(static_cast<std::size_t>(pls.num_classes), 0);
  for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
    Eigen::Index k = 0;
    const double p = probabilities.row(i).maxCoeff(&k);
    if (!(p > theta)) continue;
    pls.sample_index.push_back(static_cast<std::size_t>(i));
    pls.label.push_back(static_cast<int>(k));
    pls.confidence.push_back(p);
    pls.selected.push_back(false);
    ++pls.class_counts[static_cast<std::size_t>(k)];
  }
  pls.total = static_cast<int>(pls.sample_index.size());
  pls.weights.assign(static_cast<std::size_t>(pls.num_classes), 0.0);
  if (pls.total > 0) {
    for (std::size_t k = 0; k < pls.weights.size(); ++k) {
      pls.weights[k] = 1.0 - static_cast<double>(pls.class_counts[k]) / static_cast<double>(pls.total);
    }
  }
  return pls;
}

namespace {

// Marks the top `quota[k]` entries of each class.
PseudoLabelSet select_top(PseudoLabelSet pls, const std::vector<std::size_t>& quota) {
  std::fill(pls.selected.begin(), pls.selected.end(), false);
  for (int k = 0; k < pls.num_classes; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < pls.size(); ++i) {
      if (pls.label[i] == k) members.push_back(i);
    }
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return pls.confidence[a] > pls.confidence[b];
    });
    const std::size_t take = std::min(members.size(), quota[static_cast<std::size_t>(k)]);
    for (std::size_t j = 0; j < take; ++j) pls.selected[members[j]] = true;
  }
  return pls;
}

std::size_t ceil_count(double x) {
  // Guard against products like 0.7 * 30 = 21.000000000000004.
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

}  // namespace

PseudoLabelSet quasi_balanced_select(PseudoLabelSet pls) {
  std::vector<std::size_t> quota(static_cast<std::size_t>(pls.num_classes), 0);
  for (std::size_t k = 0; k < quota.size(); ++k) {
    const int lk = pls.class_counts[k];
    if (lk > 0) quota[k] = std::max<std::size_t>(1, ceil_count(pls.weights[k] * lk));
  }
  return select_top(std::move(pls), quota);
}

PseudoLabelSet spst_select(PseudoLabelSet pls) {
  std::fill(pls.selected.begin(), pls.selected.end(), true);
  return pls;
}

PseudoLabelSet cbst_select(PseudoLabelSet pls, double proportion) {
  if (!(proportion > 0.0 && proportion <= 1.0)) throw Error("cbst_select: proportion must lie in (0, 1]");
  std::vector<std::size_t> quota(static_cast<std::size_t>(pls.num_classes), 0);
  for (std::size_t k = 0; k < quota.size(); ++k) quota[k] = ceil_count(proportion * pls.class_counts[k]);
  return select_top(std::move(pls), quota);
}

PseudoLabelSet apply_selection(PseudoLabelSet pls, SelectionMethod method, double cbst_proportion) {
  switch (method) {
    case SelectionMethod::qbst: return quasi_balanced_select(std::move(pls));
    case SelectionMethod::spst: return spst_select(std::move(pls));
    case SelectionMethod::cbst: return cbst_select(std::move(pls), cbst_proportion);
  }
  throw Error("apply_selection: unknown method");
}

double label_entropy(const std::vector<int>& counts) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (int c : counts) {
    if (c > 0) {
      const double p = c / total;
      h -= p * std::log(p);
    }
  }
  return h;
}

nlohmann::json to_json(const RoundReport& r) {
  nlohmann::json j;
  j["round"] = r.round;
  j["theta"] = r.theta;
  j["L"] = r.total_confident;
  j["L_k"] = r.confident_counts;
  j["selected"] = r.selected_counts;
  j["entropy"] = r.entropy;
  j["precision"] = r.precision ? nlohmann::json(*r.precision) : nlohmann::json(nullptr);
  j["accuracy"] = r.accuracy ? nlohmann::json(*r.accuracy) : nlohmann::json(nullptr);
  if (!r.per_class_accuracy.empty()) {
    auto& pc = j["per_class_accuracy"] = nlohmann::json::array();
    for (double a : r.per_class_accuracy) pc.push_back(std::isnan(a) ? nlohmann::json(nullptr) : nlohmann::json(a));
  }
  j["aborted"] = r.aborted;
  return j;
}

void write_round_report(const std::vector<RoundReport>& rounds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_round_report: cannot open " + path.string());
  for (const auto& r : rounds) out << to_json(r).dump() << '\n';
  if (!out) throw Error("write_round_report: write failed for " + path.string());
}

void write_selection_csv(const PseudoLabelSet& pls, std::size_t target_size,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_selection_csv: cannot open " + path.string());
  out << "index,confident,label,confidence,selected\n" << std::setprecision(17);
  std::size_t j = 0;
  for (std::size_t i = 0; i < target_size; ++i) {
    if (j < pls.size() && pls.sample_index[j] == i) {
      out << i << ",1," << pls.label[j] << ',' << pls.confidence[j] << ',' << (pls.selected[j] ? 1 : 0) << '\n';
      ++j;
    } else {
      out << i << ",0,-1,0,0\n";
    }
  }
}

SelfTrainResult self_train_from(const ClassifierModel& warmup, const Matrix& target,
                                const SelfTrainConfig& cfg, const TrainConfig& train_cfg,
                                const std::vector<int>* eval_labels) {
  cfg.validate();
  train_cfg.validate();
  warmup.validate();
  if (target.rows() == 0) throw Error("self_train: empty target set");
  if (eval_labels && static_cast<Eigen::Index>(eval_labels->size()) != target.rows()) {
    throw Error("self_train: evaluation labels do not match the target set");
  }
  const int k = warmup.num_classes;
  SelfTrainResult result;
  result.warmup = warmup;
  result.model = warmup;

  for (int round = 0; round < cfg.rounds; ++round) {
    RoundReport report;
    report.round = round;
    report.theta = cfg.threshold(round);
    PseudoLabelSet pls = generate_pseudo_labels(result.model.predict_proba(target), report.theta);
    pls = apply_selection(std::move(pls), cfg.method, cfg.cbst_proportion);
    report.total_confident = pls.total;
    report.confident_counts = pls.class_counts;
    report.selected_counts = pls.selected_counts();
    report.entropy = label_entropy(report.selected_counts);

    LabeledFeatures selected;
    selected.num_classes = k;
    selected.features.resize(static_cast<Eigen::Index>(pls.selected_total()), target.cols());
    std::size_t hits = 0;
    for (std::size_t i = 0, r = 0; i < pls.size(); ++i) {
      if (!pls.selected[i]) continue;
      selected.features.row(static_cast<Eigen::Index>(r++)) = target.row(static_cast<Eigen::Index>(pls.sample_index[i]));
      selected.labels.push_back(pls.label[i]);
      if (eval_labels && (*eval_labels)[pls.sample_index[i]] == pls.label[i]) ++hits;
    }
    if (eval_labels && !selected.labels.empty()) {
      report.precision = static_cast<double>(hits) / static_cast<double>(selected.labels.size());
    }
    if (selected.labels.empty()) {
      report.aborted = true;
      result.rounds.push_back(report);
      result.selections.push_back(std::move(pls));
      result.aborted = true;
      result.message = "empty selection at round " + std::to_string(round);
      return result;
    }

    // Fresh model on selected target samples only; classes without any
    // selected sample keep their initial weights.
    TrainConfig inner = train_cfg;
    inner.learning_rate = cfg.inner_learning_rate;
    inner.batch_size = cfg.inner_batch_size;
    inner.epochs = cfg.epochs_per_round;
    inner.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(round));
    inner.allow_missing_classes = true;
    result.model = train(selected, inner);
    if (eval_labels) {
      const Evaluation e = evaluate_probabilities(result.model.predict_proba(target), *eval_labels);
      report.accuracy = e.accuracy;
      report.per_class_accuracy = e.per_class_accuracy;
    }
    result.rounds.push_back(report);
    result.selections.push_back(std::move(pls));
  }
  return result;
}

SelfTrainResult self_train(const LabeledFeatures& source, const Matrix& target,
                           const SelfTrainConfig& cfg, const TrainConfig& train_cfg,
                           const MixupPool* mixup, const std::vector<int>* eval_labels) {
  cfg.validate();
  if (source.features.cols() != target.cols()) throw Error("self_train: source and target feature dimensions differ");
  const ClassifierModel warmup = train(source, train_cfg, mixup);
  return self_train_from(warmup, target, cfg, train_cfg, eval_labels);
}

}  // namespace stereosynth
