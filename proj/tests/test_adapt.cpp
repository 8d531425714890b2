#include "stereosynth/adapt.hpp"
#include "gaussian_task.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace stereosynth;

namespace {

// Rows predicting class k with confidence conf; the remainder is spread evenly.
Matrix rows_for_counts(const std::vector<int>& counts, double conf = 0.9) {
  const int k = static_cast<int>(counts.size());
  int n = 0;
  for (int c : counts) n += c;
  Matrix p(n, k);
  int r = 0;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < counts[static_cast<std::size_t>(c)]; ++i, ++r) {
      p.row(r).setConstant((1.0 - conf) / (k - 1));
      p(r, c) = conf;
    }
  }
  return p;
}

SelfTrainConfig fast_config(SelectionMethod m) {
  SelfTrainConfig c;
  c.method = m;
  c.rounds = 5;
  c.inner_learning_rate = 1e-1;
  c.seed = 1;
  return c;
}

TrainConfig warmup_config() {
  TrainConfig t;
  t.epochs = 30;
  t.learning_rate = 1e-2;
  t.seed = 3;
  return t;
}

}  // namespace

TEST_SUITE("adapt") {

TEST_CASE("pseudo-label assignment uses a strict threshold") {
  Matrix p(3, 3);
  p << 0.9, 0.05, 0.05,
       0.7, 0.2, 0.1,
       0.1, 0.8, 0.1;
  const auto pls = generate_pseudo_labels(p, 0.8);
  REQUIRE(pls.size() == 1);
  CHECK(pls.sample_index[0] == 0);
  CHECK(pls.label[0] == 0);
  CHECK(pls.confidence[0] == 0.9);
  CHECK(pls.total == 1);
  CHECK(pls.class_counts == std::vector<int>{1, 0, 0});
  CHECK(generate_pseudo_labels(Matrix(0, 3), 0.8).size() == 0);
}

TEST_CASE("QBST selection arithmetic") {
  const auto pls = generate_pseudo_labels(rows_for_counts({50, 30, 20}), 0.8);
  CHECK(pls.total == 100);
  CHECK(pls.weights[0] == doctest::Approx(0.5));
  CHECK(pls.weights[1] == doctest::Approx(0.7));
  CHECK(pls.weights[2] == doctest::Approx(0.8));
  CHECK(quasi_balanced_select(pls).selected_counts() == std::vector<int>{25, 21, 16});

  const auto balanced = quasi_balanced_select(generate_pseudo_labels(rows_for_counts({12, 12, 12, 12}), 0.8));
  for (double mu : balanced.weights) CHECK(mu == doctest::Approx(0.75));
  CHECK(balanced.selected_counts() == std::vector<int>{9, 9, 9, 9});

  const auto single = quasi_balanced_select(generate_pseudo_labels(rows_for_counts({40, 0, 0}), 0.8));
  CHECK(single.weights[0] == 0.0);
  CHECK(single.selected_counts() == std::vector<int>{1, 0, 0});
}

TEST_CASE("QBST keeps the most confident samples, ties to the lower index") {
  Matrix p(5, 2);
  p << 0.85, 0.15,
       0.95, 0.05,
       0.95, 0.05,
       0.90, 0.10,
       0.10, 0.90;
  auto pls = quasi_balanced_select(generate_pseudo_labels(p, 0.8));
  // L = (4, 1): μ_0 = 0.2 → 1 sample, μ_1 = 0.8 → 1 sample.
  CHECK(pls.selected == std::vector<bool>{false, true, false, false, true});
}

TEST_CASE("SPST and CBST selections") {
  const auto pls = generate_pseudo_labels(rows_for_counts({50, 30, 20}), 0.8);
  const auto sp = spst_select(pls);
  CHECK(sp.selected_counts() == pls.class_counts);
  CHECK(sp.selected_total() == pls.size());
  CHECK(spst_select(generate_pseudo_labels(Matrix(0, 3), 0.8)).selected_total() == 0);
  CHECK(cbst_select(pls, 1.0).selected == sp.selected);
  CHECK(cbst_select(pls, 0.5).selected_counts() == std::vector<int>{25, 15, 10});
  CHECK_THROWS_AS(cbst_select(pls, 0.0), Error);
}

TEST_CASE("randomized selection invariants") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix logits(200, 4);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 6.0 * u(rng) * u(rng);
    const auto pls = generate_pseudo_labels(softmax_rows(logits), 0.6);
    const auto q = quasi_balanced_select(pls);
    const auto s = spst_select(pls);
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK(q.confidence[i] > 0.6);
      Eigen::Index arg = 0;
      softmax_rows(logits).row(static_cast<Eigen::Index>(q.sample_index[i])).maxCoeff(&arg);
      CHECK(q.label[i] == arg);
    }
    const auto qc = q.selected_counts(), sc = s.selected_counts();
    for (int k = 0; k < 4; ++k) {
      CHECK(qc[static_cast<std::size_t>(k)] <= sc[static_cast<std::size_t>(k)]);
      for (int j = 0; j < 4; ++j) {
        if (pls.class_counts[static_cast<std::size_t>(j)] > pls.class_counts[static_cast<std::size_t>(k)]) {
          CHECK(pls.weights[static_cast<std::size_t>(j)] < pls.weights[static_cast<std::size_t>(k)]);
        }
      }
    }
  }
}

TEST_CASE("label entropy") {
  CHECK(label_entropy({0, 0}) == 0.0);
  CHECK(label_entropy({5, 0}) == 0.0);
  CHECK(label_entropy({3, 3}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("config validation") {
  SelfTrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.theta_0 = 0.99;
  c.epsilon = 0.01;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(parse_selection_method("fixmatch"), Error);
}

TEST_CASE("zero rounds returns the warm-up model") {
  const auto task = make_gaussian_task(1, 8, 30, 200);
  SelfTrainConfig cfg = fast_config(SelectionMethod::qbst);
  cfg.rounds = 0;
  const auto r = self_train(task.source, task.target, cfg, warmup_config());
  CHECK(r.rounds.empty());
  CHECK(r.model.weights == r.warmup.weights);
  CHECK(r.model.bias == r.warmup.bias);
}

TEST_CASE("threshold schedule, from-scratch rounds and target-only training") {
  const auto task = make_gaussian_task(2, 8, 40, 300);
  const SelfTrainConfig cfg = fast_config(SelectionMethod::qbst);
  const TrainConfig tc = warmup_config();
  const auto r = self_train(task.source, task.target, cfg, tc, nullptr, &task.target_labels);
  REQUIRE_FALSE(r.aborted);
  REQUIRE(r.rounds.size() == 5);
  for (std::size_t i = 1; i < r.rounds.size(); ++i) {
    CHECK(r.rounds[i].theta - r.rounds[i - 1].theta == doctest::Approx(cfg.epsilon).epsilon(1e-12));
    CHECK(r.rounds[i].theta > r.rounds[i - 1].theta);
  }
  // Retraining the last round from its selection alone reproduces the model.
  const auto& last = r.selections.back();
  LabeledFeatures sel;
  sel.num_classes = 4;
  sel.features.resize(static_cast<Eigen::Index>(last.selected_total()), task.target.cols());
  for (std::size_t i = 0, row = 0; i < last.size(); ++i) {
    if (!last.selected[i]) continue;
    sel.features.row(static_cast<Eigen::Index>(row++)) = task.target.row(static_cast<Eigen::Index>(last.sample_index[i]));
    sel.labels.push_back(last.label[i]);
  }
  TrainConfig inner = tc;
  inner.learning_rate = cfg.inner_learning_rate;
  inner.batch_size = cfg.inner_batch_size;
  inner.epochs = cfg.epochs_per_round;
  inner.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(cfg.rounds - 1));
  inner.allow_missing_classes = true;
  const auto detached = train(sel, inner);
  CHECK(detached.weights == r.model.weights);
  CHECK(detached.mean == r.model.mean);
  for (const auto& rr : r.rounds) {
    CHECK(rr.precision.has_value());
    CHECK(rr.accuracy.has_value());
  }
}

TEST_CASE("no shift: one SPST round does not degrade accuracy") {
  const auto task = make_gaussian_task(4, 8, 100, 400, 0.0);
  // Same distribution as the source: rebuild the target from source-like draws.
  const auto same = make_gaussian_task(5, 8, 100, 400, 0.0);
  SelfTrainConfig cfg = fast_config(SelectionMethod::spst);
  cfg.rounds = 1;
  cfg.epsilon = 0.0;
  const auto r = self_train(task.source, same.source.features, cfg, warmup_config(), nullptr, &same.source.labels);
  REQUIRE_FALSE(r.aborted);
  const double warm = evaluate(r.warmup, same.source).accuracy;
  CHECK(*r.rounds[0].accuracy >= warm - 0.02);
}

TEST_CASE("QBST selected sets are at least as balanced as SPST's") {
  const auto task = make_gaussian_task(6);
  const auto q = self_train(task.source, task.target, fast_config(SelectionMethod::qbst), warmup_config());
  const auto s = self_train(task.source, task.target, fast_config(SelectionMethod::spst), warmup_config());
  REQUIRE_FALSE(q.aborted);
  REQUIRE_FALSE(s.aborted);
  for (std::size_t i = 0; i < q.rounds.size(); ++i) CHECK(q.rounds[i].entropy >= s.rounds[i].entropy);
}

TEST_CASE("empty selection aborts and keeps the last generator") {
  const auto task = make_gaussian_task(7, 8, 20, 100);
  TrainConfig tc;
  tc.epochs = 0;  // near-uniform generator: nothing passes 0.8
  SelfTrainConfig cfg = fast_config(SelectionMethod::qbst);
  const auto r = self_train(task.source, task.target, cfg, tc);
  CHECK(r.aborted);
  REQUIRE(r.rounds.size() == 1);
  CHECK(r.rounds[0].aborted);
  CHECK(r.model.weights == r.warmup.weights);
  CHECK(r.message.find("round 0") != std::string::npos);
}

TEST_CASE("round report and selection CSV") {
  TempDir dir("report");
  RoundReport rr;
  rr.round = 2;
  rr.theta = 0.81;
  rr.confident_counts = {3, 1};
  rr.selected_counts = {2, 1};
  rr.total_confident = 4;
  rr.entropy = label_entropy(rr.selected_counts);
  write_round_report({rr, rr}, dir.path / "r.jsonl");
  std::ifstream in(dir.path / "r.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("L").get<int>() == 4);
    CHECK(j.at("selected") == nlohmann::json({2, 1}));
    CHECK(j.at("accuracy").is_null());
    ++lines;
  }
  CHECK(lines == 2);

  const auto pls = spst_select(generate_pseudo_labels(rows_for_counts({2, 1}), 0.8));
  write_selection_csv(pls, 5, dir.path / "s.csv");
  std::ifstream csv(dir.path / "s.csv");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
}

}  // TEST_SUITE
