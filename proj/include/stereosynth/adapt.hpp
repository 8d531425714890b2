#pragma once

#include "stereosynth/classify.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace stereosynth {

enum class SelectionMethod { qbst, spst, cbst };

std::string to_string(SelectionMethod method);
SelectionMethod parse_selection_method(std::string_view name);

struct SelfTrainConfig {
  double theta_0 = 0.8;
  double epsilon = 5e-3;
  int rounds = 10;
  int epochs_per_round = 10;
  double inner_learning_rate = 1e-3;
  int inner_batch_size = 32;
  SelectionMethod method = SelectionMethod::qbst;
  double cbst_proportion = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  double threshold(int round) const { return theta_0 + round * epsilon; }
};

/// Confident target samples at one threshold. Entries are in ascending
/// sample order.
struct PseudoLabelSet {
  int num_classes = 0;
  double theta = 0.0;
  std::vector<std::size_t> sample_index;
  std::vector<int> label;
  std::vector<double> confidence;
  std::vector<bool> selected;
  std::vector<int> class_counts;  // L_k
  int total = 0;                  // L
  std::vector<double> weights;    // μ_k = 1 - L_k / L, 0 when L = 0

  std::size_t size() const { return sample_index.size(); }
  std::vector<int> selected_counts() const;
  std::size_t selected_total() const;
};

/// Rows of `probabilities` are p(·|x). A sample is confident when its
/// maximum probability is strictly greater than `theta`.
PseudoLabelSet generate_pseudo_labels(const Matrix& probabilities, double theta);

/// Per class, the top max(1, ⌈μ_k L_k⌉) by confidence (ties to the lower index).
PseudoLabelSet quasi_balanced_select(PseudoLabelSet pls);
PseudoLabelSet spst_select(PseudoLabelSet pls);
/// Per class, the top ⌈proportion · L_k⌉ by confidence.
PseudoLabelSet cbst_select(PseudoLabelSet pls, double proportion);
PseudoLabelSet apply_selection(PseudoLabelSet pls, SelectionMethod method, double cbst_proportion);

/// Shannon entropy (nats) of the class distribution given by `counts`.
double label_entropy(const std::vector<int>& counts);

struct RoundReport {
  int round = 0;
  double theta = 0.0;
  int total_confident = 0;
  std::vector<int> confident_counts;
  std::vector<int> selected_counts;
  double entropy = 0.0;
  std::optional<double> precision;  // of selected pseudo-labels
  std::optional<double> accuracy;   // of the round's model on the target
  std::vector<double> per_class_accuracy;
  bool aborted = false;
};

nlohmann::json to_json(const RoundReport& r);
void write_round_report(const std::vector<RoundReport>& rounds, const std::filesystem::path& path);

struct SelfTrainResult {
  ClassifierModel warmup;
  ClassifierModel model;
  std::vector<RoundReport> rounds;
  std::vector<PseudoLabelSet> selections;
  bool aborted = false;
  std::string message;
};

/// Self-training from an existing generator. `target` carries no labels;
/// `eval_labels`, when given, only feed the report.
SelfTrainResult self_train_from(const ClassifierModel& warmup, const Matrix& target,
                                const SelfTrainConfig& cfg, const TrainConfig& train_cfg,
                                const std::vector<int>* eval_labels = nullptr);

/// Warm-up on `source` (with `mixup` when given) followed by self_train_from.
SelfTrainResult self_train(const LabeledFeatures& source, const Matrix& target,
                           const SelfTrainConfig& cfg, const TrainConfig& train_cfg,
                           const MixupPool* mixup = nullptr,
                           const std::vector<int>* eval_labels = nullptr);

/// One row per target sample: index, confident, label, confidence, selected.
void write_selection_csv(const PseudoLabelSet& pls, std::size_t target_size,
                         const std::filesystem::path& path);

}  // namespace stereosynth
