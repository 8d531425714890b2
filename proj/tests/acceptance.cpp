// Acceptance suite. Prints one PASS/FAIL line per criterion; the exit code is
// the number of failures. Pass criterion numbers as arguments to run a subset.
#include "stereosynth/adapt.hpp"
#include "stereosynth/classify.hpp"
#include "stereosynth/synth.hpp"
#include "fps_oracle.hpp"
#include "gaussian_task.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

using namespace stereosynth;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kPlaneDisparity = 25.0;
constexpr double kPlaneDisparityTol = 0.25;
constexpr double kPlaneInlierFraction = 0.95;
constexpr double kPlaneDepthRms = 0.08;
constexpr double kPlaneSeconds = 30.0;
constexpr double kCleanSphereRelRms = 1e-3;
constexpr double kSphereSeconds = 120.0;
constexpr double kFpsSeconds = 10.0;
constexpr double kMuTol = 1e-12;
constexpr double kBalanceSeconds = 300.0;
constexpr double kBenchmarkSeconds = 900.0;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 5.0;
// From-scratch rounds of a linear head need a larger step than the default.
constexpr double kInnerLearningRate = 1e-1;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Details {
  std::ostringstream s;
  template <class T>
  Details& kv(const std::string& k, const T& v) {
    s << ' ' << k << '=' << v;
    return *this;
  }
  std::string str() const { return s.str(); }
};

// Half-pixel quantization bound on depth error at depth z.
double quantization_bound(double z, double f, double b) { return z * z * 0.5 / (f * b); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path = fs::temp_directory_path() / ("stereosynth_accept_" + tag + "_" + std::to_string(rd()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

Outcome plane_oracle() {
  const auto t0 = Clock::now();
  const int size = 1080;
  const double f = 1000.0, b = 0.1, z = 4.0;
  const int workers = default_workers();
  const Scene scene(make_rectangle(20.0, 20.0, 0.0), Lighting{});
  const StereoRig rig{CameraIntrinsics::centered(f, size, size), RigidPose::look_at({0, 0, z}, Vec3::Zero()), b,
                      CameraIntrinsics::centered(f, size, size)};
  const auto pattern = make_speckle_pattern(derive_seed(1, "pattern"), size, size, 0.15);
  const auto img = render_stereo(scene, rig, pattern, workers);
  const auto disp = block_match(img.left, img.right, MatchParams{}, workers);
  const auto depth = disparity_to_depth(disp, f, b);
  std::size_t valid = 0, inliers = 0;
  double sq = 0.0;
  for (std::size_t i = 0; i < disp.values.size(); ++i) {
    if (!disp.valid.data[i]) continue;
    ++valid;
    inliers += std::abs(disp.values.data[i] - kPlaneDisparity) <= kPlaneDisparityTol;
    sq += (depth.values.data[i] - z) * (depth.values.data[i] - z);
  }
  const double frac = valid ? static_cast<double>(inliers) / valid : 0.0;
  const double rms = valid ? std::sqrt(sq / valid) : INFINITY;
  const double secs = seconds_since(t0);
  const double bound = std::min(kPlaneDepthRms, quantization_bound(z, f, b));
  Details d;
  d.kv("valid_pixels", valid).kv("inlier_fraction", frac).kv("depth_rms_m", rms).kv("bound_m", bound).kv("seconds", secs);
  return {valid > 0 && frac >= kPlaneInlierFraction && rms <= bound && secs < kPlaneSeconds, d.str()};
}

double radial_rms(const PointCloud& c, double r) {
  double sq = 0.0;
  for (const auto& p : c.points) sq += (p.norm() - r) * (p.norm() - r);
  return std::sqrt(sq / static_cast<double>(c.size()));
}

Outcome sphere_reconstruction() {
  const auto t0 = Clock::now();
  const int workers = default_workers();
  const double r = 0.5;  // unit-cube normalization of a unit sphere
  const auto mesh = normalize_to_unit_cube(make_uv_sphere(1.0, 256, 128));
  GenerationConfig cfg;
  cfg.mode = GenerationMode::clean;
  InstanceArtifacts clean_art;
  const auto clean = generate_instance(mesh, 0, cfg, 7, workers, &clean_art);
  cfg.mode = GenerationMode::speckle;
  InstanceArtifacts speckle_art;
  const auto speckle = generate_instance(mesh, 0, cfg, 7, workers, &speckle_art);
  double far = 0.0;
  for (const auto& v : speckle_art.views) far = std::max(far, v.pose.translation.norm());
  const double bound = quantization_bound(far, cfg.focal_length_px, cfg.baseline_m);
  const double rc = radial_rms(clean, r), rs = radial_rms(speckle, r);
  const double secs = seconds_since(t0);
  Details d;
  d.kv("clean_rms_m", rc).kv("clean_bound_m", kCleanSphereRelRms * r).kv("speckle_rms_m", rs)
      .kv("speckle_bound_m", bound).kv("max_camera_distance_m", far).kv("seconds", secs);
  return {rc < kCleanSphereRelRms * r && rs <= bound && rc <= rs && secs < kSphereSeconds, d.str()};
}

Outcome fps_oracle() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(3, "fps"));
  std::uniform_int_distribution<int> n_pts(1, 300);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = n_pts(rng);
    std::vector<Vec3> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    // Some clouds carry exact duplicates to exercise the tie rule.
    if (trial % 4 == 0 && n > 2) {
      for (int i = 0; i < n / 3; ++i) pts[static_cast<std::size_t>(i)] = pts[static_cast<std::size_t>(n - 1 - i)];
    }
    const int k = std::uniform_int_distribution<int>(1, std::min(50, n))(rng);
    const auto start = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, n - 1)(rng));
    if (farthest_point_indices(pts, static_cast<std::size_t>(k), start) !=
        brute_force_fps(pts, static_cast<std::size_t>(k), start)) {
      ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  Details d;
  d.kv("clouds", 100).kv("mismatches", mismatches).kv("seconds", secs);
  return {mismatches == 0 && secs < kFpsSeconds, d.str()};
}

Outcome qbst_arithmetic() {
  Rng rng(derive_seed(4, "qbst"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  double worst_mu = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 400)(rng);
    const int k = std::uniform_int_distribution<int>(2, 8)(rng);
    const double theta = 0.3 + 0.6 * u(rng);
    Matrix p(n, k);
    for (int i = 0; i < n; ++i) {
      const double sharp = 8.0 * u(rng);
      for (int j = 0; j < k; ++j) p(i, j) = std::exp(sharp * u(rng) * u(rng));
      p.row(i) /= p.row(i).sum();
    }
    // Straightforward recomputation.
    std::vector<int> lk(static_cast<std::size_t>(k), 0);
    std::vector<std::vector<std::pair<double, int>>> members(static_cast<std::size_t>(k));
    for (int i = 0; i < n; ++i) {
      int arg = 0;
      for (int j = 1; j < k; ++j) {
        if (p(i, j) > p(i, arg)) arg = j;
      }
      if (p(i, arg) > theta) {
        ++lk[static_cast<std::size_t>(arg)];
        members[static_cast<std::size_t>(arg)].push_back({p(i, arg), i});
      }
    }
    const int l = std::accumulate(lk.begin(), lk.end(), 0);
    const auto pls = quasi_balanced_select(generate_pseudo_labels(p, theta));
    if (pls.total != l || pls.class_counts != lk) ++bad;
    const auto counts = pls.selected_counts();
    for (int j = 0; j < k; ++j) {
      const double mu = l > 0 ? 1.0 - static_cast<double>(lk[static_cast<std::size_t>(j)]) / l : 0.0;
      worst_mu = std::max(worst_mu, std::abs(mu - pls.weights[static_cast<std::size_t>(j)]));
      const int ljk = lk[static_cast<std::size_t>(j)];
      int expect = 0;
      if (ljk > 0) {
        // μ_k L_k = L_k (L - L_k) / L exactly in integers.
        const long num = static_cast<long>(ljk) * (l - ljk);
        expect = std::max(1, static_cast<int>((num + l - 1) / l));
      }
      if (counts[static_cast<std::size_t>(j)] != expect) ++bad;
      // The selected members are the most confident ones.
      auto& m = members[static_cast<std::size_t>(j)];
      std::stable_sort(m.begin(), m.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      std::vector<int> want;
      for (int q = 0; q < expect; ++q) want.push_back(m[static_cast<std::size_t>(q)].second);
      std::sort(want.begin(), want.end());
      std::vector<int> got;
      for (std::size_t q = 0; q < pls.size(); ++q) {
        if (pls.selected[q] && pls.label[q] == j) got.push_back(static_cast<int>(pls.sample_index[q]));
      }
      if (got != want) ++bad;
    }
  }
  Details d;
  d.kv("matrices", 50).kv("mismatches", bad).kv("max_mu_error", worst_mu);
  return {bad == 0 && worst_mu <= kMuTol, d.str()};
}

SelfTrainConfig balance_config(SelectionMethod m, std::uint64_t seed) {
  SelfTrainConfig c;
  c.method = m;
  c.rounds = 10;
  c.inner_learning_rate = kInnerLearningRate;
  c.seed = seed;
  return c;
}

Outcome balance_property() {
  const auto t0 = Clock::now();
  int entropy_violations = 0, rounds_compared = 0;
  double q_recall = 0.0, s_recall = 0.0;
  bool aborted = false;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto task = make_gaussian_task(seed);
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.epochs = 50;
    tc.seed = derive_seed(seed, "warmup");
    const ClassifierModel warm = train(task.source, tc);
    const auto q = self_train_from(warm, task.target, balance_config(SelectionMethod::qbst, seed), tc, &task.target_labels);
    const auto s = self_train_from(warm, task.target, balance_config(SelectionMethod::spst, seed), tc, &task.target_labels);
    aborted = aborted || q.aborted || s.aborted;
    for (std::size_t r = 0; r < std::min(q.rounds.size(), s.rounds.size()); ++r) {
      ++rounds_compared;
      if (q.rounds[r].entropy < s.rounds[r].entropy) ++entropy_violations;
    }
    const auto qe = evaluate_probabilities(q.model.predict_proba(task.target), task.target_labels);
    const auto se = evaluate_probabilities(s.model.predict_proba(task.target), task.target_labels);
    q_recall += qe.per_class_accuracy[3] / 3.0;
    s_recall += se.per_class_accuracy[3] / 3.0;
  }
  const double secs = seconds_since(t0);
  Details d;
  d.kv("rounds_compared", rounds_compared).kv("entropy_violations", entropy_violations)
      .kv("qbst_minority_recall", q_recall).kv("spst_minority_recall", s_recall).kv("aborted", aborted)
      .kv("seconds", secs);
  return {!aborted && rounds_compared == 30 && entropy_violations == 0 && q_recall >= s_recall &&
              secs < kBalanceSeconds,
          d.str()};
}

// Reduced sensor for the benchmark: half resolution and focal length keep the
// same field of view and stereo geometry scaled by one half.
GenerationConfig benchmark_config(GenerationMode mode) {
  GenerationConfig c;
  c.mode = mode;
  c.render_width = 540;
  c.render_height = 540;
  c.focal_length_px = 500.0;
  c.depth_downsample = 2;
  c.match.max_disparity = 64;
  c.fps_points = 1024;
  return c;
}

Outcome sim2real_direction() {
  const auto t0 = Clock::now();
  const int workers = default_workers();
  const int per_class = 12;
  double acc_surface = 0.0, acc_speckle = 0.0, acc_adapted = 0.0;
  bool aborted = false;
  std::ostringstream per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ScratchDir dir("bench" + std::to_string(seed));
    write_shape_benchmark(dir.path / "source_meshes", per_class, derive_seed(seed, "source_meshes"));
    write_shape_benchmark(dir.path / "target_meshes", per_class, derive_seed(seed, "target_meshes"));
    const auto surf = generate_dataset(dir.path / "source_meshes", dir.path / "surface",
                                       benchmark_config(GenerationMode::surface), derive_seed(seed, "source"), workers);
    const auto speck = generate_dataset(dir.path / "source_meshes", dir.path / "speckle",
                                        benchmark_config(GenerationMode::speckle), derive_seed(seed, "source"), workers);
    const auto tgt = generate_dataset(dir.path / "target_meshes", dir.path / "target",
                                      benchmark_config(GenerationMode::speckle), derive_seed(seed, "target"), workers);
    const int k = static_cast<int>(tgt.class_names.size());
    const LabeledFeatures fs_surf = make_labeled_features(load_clouds(surf), k, workers);
    const LabeledFeatures fs_speck = make_labeled_features(load_clouds(speck), k, workers);
    const LabeledFeatures fs_tgt = make_labeled_features(load_clouds(tgt), k, workers);

    TrainConfig tc;
    tc.seed = derive_seed(seed, "warmup");
    const ClassifierModel m_surf = train(fs_surf, tc);
    const ClassifierModel m_speck = train(fs_speck, tc);
    const double a_surf = evaluate(m_surf, fs_tgt).accuracy;
    const double a_speck = evaluate(m_speck, fs_tgt).accuracy;

    SelfTrainConfig st;
    st.method = SelectionMethod::qbst;
    st.inner_learning_rate = kInnerLearningRate;
    st.seed = derive_seed(seed, "adapt");
    const auto adapted = self_train_from(m_speck, fs_tgt.features, st, tc);
    aborted = aborted || adapted.aborted;
    const double a_adapt = evaluate(adapted.model, fs_tgt).accuracy;
    per_seed << " seed" << seed << "=" << a_surf << "/" << a_speck << "/" << a_adapt;
    acc_surface += 100.0 * a_surf / 3.0;
    acc_speckle += 100.0 * a_speck / 3.0;
    acc_adapted += 100.0 * a_adapt / 3.0;
  }
  const double secs = seconds_since(t0);
  Details d;
  d.kv("surface_source_acc", acc_surface).kv("speckle_source_acc", acc_speckle).kv("qbst_acc", acc_adapted)
      .kv("aborted", aborted).kv("seconds", secs);
  return {acc_speckle - acc_surface > 0.0 && acc_adapted - acc_speckle > 0.0 && !aborted && secs < kBenchmarkSeconds,
          d.str() + per_seed.str()};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(7, "grad"));
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial, dim = 4 + trial % 5, k = 2 + trial % 4;
    Matrix z(n, dim), w(dim, k), t = Matrix::Zero(n, k);
    Vector b(k);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.5 * g(rng);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.5 * g(rng);
    for (int i = 0; i < n; ++i) {
      // Alternate one-hot and soft (mixup) targets.
      if (i % 2 == 0) {
        t(i, i % k) = 1.0;
      } else {
        const double lam = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        t(i, i % k) += lam;
        t(i, (i + 1) % k) += 1.0 - lam;
      }
    }
    Matrix gw;
    Vector gb;
    head_loss(w, b, z, t, &gw, &gb);
    const double h = 1e-5;
    auto rel = [](double a, double f) { return std::abs(a - f) / std::max({std::abs(a), std::abs(f), 1e-6}); };
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      Matrix wp = w, wm = w;
      wp.data()[i] += h;
      wm.data()[i] -= h;
      worst = std::max(worst, rel(gw.data()[i], (head_loss(wp, b, z, t) - head_loss(wm, b, z, t)) / (2 * h)));
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      Vector bp = b, bm = b;
      bp[i] += h;
      bm[i] -= h;
      worst = std::max(worst, rel(gb[i], (head_loss(w, bp, z, t) - head_loss(w, bm, z, t)) / (2 * h)));
    }
  }
  const double secs = seconds_since(t0);
  Details d;
  d.kv("instances", 10).kv("max_relative_error", worst).kv("seconds", secs);
  return {worst <= kGradRelTol && secs < kGradSeconds, d.str()};
}

Outcome determinism() {
  ScratchDir dir("determinism");
  write_shape_benchmark(dir.path / "meshes", 5, 8);
  const auto cfg = benchmark_config(GenerationMode::speckle);
  const auto a = generate_dataset(dir.path / "meshes", dir.path / "w1", cfg, 8, 1);
  const auto b = generate_dataset(dir.path / "meshes", dir.path / "w8", cfg, 8, 8);
  int differing = 0;
  for (const auto& e : a.entries) differing += slurp(dir.path / "w1" / e.cloud_path) != slurp(dir.path / "w8" / e.cloud_path);
  const bool manifest_equal = slurp(dir.path / "w1" / "manifest.json") == slurp(dir.path / "w8" / "manifest.json");
  Details d;
  d.kv("instances", a.entries.size()).kv("differing_clouds", differing).kv("manifest_identical", manifest_equal);
  return {a.entries.size() == 20 && b.entries.size() == 20 && differing == 0 && manifest_equal, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
      {1, {"stereo_plane_oracle", plane_oracle}},
      {2, {"sphere_reconstruction", sphere_reconstruction}},
      {3, {"fps_oracle", fps_oracle}},
      {4, {"qbst_arithmetic", qbst_arithmetic}},
      {5, {"balance_property", balance_property}},
      {6, {"sim2real_direction", sim2real_direction}},
      {7, {"gradient_check", gradient_check}},
      {8, {"determinism", determinism}},
  };
  std::vector<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.push_back(std::stoi(argv[i]));
  if (chosen.empty()) {
    for (const auto& [id, _] : criteria) chosen.push_back(id);
  }
  int failures = 0;
  for (int id : chosen) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      std::cerr << "unknown criterion " << id << '\n';
      return 255;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string(" error=\"") + e.what() + "\""};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion=" << id << " name=" << it->second.first << o.detail
              << std::endl;
  }
  return failures;
}
