#include "stereosynth/cli.hpp"

#include "stereosynth/adapt.hpp"
#include "stereosynth/classify.hpp"
#include "stereosynth/image.hpp"
#include "stereosynth/synth.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace stereosynth {
namespace {

namespace fs = std::filesystem;

fs::path default_out(const std::string& sub) {
  const char* root = std::getenv("STEREOSYNTH_OUT");
  return fs::path(root && *root ? root : "out") / sub;
}

// Generation parameters shared by generate and render-debug.
struct GenerationArgs {
  GenerationConfig cfg;
  std::string mode = "speckle";
  std::string config_json;

  void add(CLI::App* app) {
    app->add_option("--mode", mode, "speckle, clean or surface")
        ->check(CLI::IsMember({"speckle", "clean", "surface"}))
        ->capture_default_str();
    app->add_option("--generation-json", config_json, "GenerationConfig as JSON (flags still override)")
        ->check(CLI::ExistingFile);
    app->add_option("--views", cfg.n_views)->capture_default_str();
    app->add_option("--fps-points", cfg.fps_points)->capture_default_str();
    app->add_option("--distance-min", cfg.distance_min_m)->capture_default_str();
    app->add_option("--distance-max", cfg.distance_max_m)->capture_default_str();
    app->add_option("--elevation-min", cfg.elevation_min_deg)->capture_default_str();
    app->add_option("--elevation-max", cfg.elevation_max_deg)->capture_default_str();
    app->add_option("--translation-jitter", cfg.view_translation_jitter_m)->capture_default_str();
    app->add_option("--rotation-jitter", cfg.view_rotation_jitter_rad)->capture_default_str();
    app->add_option("--baseline", cfg.baseline_m)->capture_default_str();
    app->add_option("--width", cfg.render_width)->capture_default_str();
    app->add_option("--height", cfg.render_height)->capture_default_str();
    app->add_option("--focal", cfg.focal_length_px)->capture_default_str();
    app->add_option("--downsample", cfg.depth_downsample)->capture_default_str();
    app->add_option("--dot-density", cfg.dot_density)->capture_default_str();
    app->add_option("--surface-oversample", cfg.surface_oversample)->capture_default_str();
    app->add_option("--repetitions", cfg.repetitions)->capture_default_str();
    app->add_option("--light-samples", cfg.lighting.light_samples)->capture_default_str();
    app->add_option("--light-size", cfg.lighting.light_size)->capture_default_str();
    app->add_option("--projector-intensity", cfg.lighting.projector_intensity)->capture_default_str();
    app->add_option("--window-radius", cfg.match.window_radius)->capture_default_str();
    app->add_option("--max-disparity", cfg.match.max_disparity)->capture_default_str();
    app->add_option("--uniqueness-ratio", cfg.match.uniqueness_ratio)->capture_default_str();
    app->add_option("--texture-threshold", cfg.match.texture_threshold)->capture_default_str();
  }

  // JSON supplies the base values; explicitly given flags win.
  GenerationConfig resolve(const CLI::App* app) const {
    GenerationConfig out = cfg;
    if (!config_json.empty()) {
      std::ifstream in(config_json);
      nlohmann::json j;
      in >> j;
      GenerationConfig base = generation_config_from_json(j);
      for (const CLI::Option* opt : app->get_options()) {
        if (opt->count() > 0) continue;
        const std::string name = opt->get_name();
        if (name == "--views") out.n_views = base.n_views;
        else if (name == "--fps-points") out.fps_points = base.fps_points;
        else if (name == "--distance-min") out.distance_min_m = base.distance_min_m;
        else if (name == "--distance-max") out.distance_max_m = base.distance_max_m;
        else if (name == "--elevation-min") out.elevation_min_deg = base.elevation_min_deg;
        else if (name == "--elevation-max") out.elevation_max_deg = base.elevation_max_deg;
        else if (name == "--translation-jitter") out.view_translation_jitter_m = base.view_translation_jitter_m;
        else if (name == "--rotation-jitter") out.view_rotation_jitter_rad = base.view_rotation_jitter_rad;
        else if (name == "--baseline") out.baseline_m = base.baseline_m;
        else if (name == "--width") out.render_width = base.render_width;
        else if (name == "--height") out.render_height = base.render_height;
        else if (name == "--focal") out.focal_length_px = base.focal_length_px;
        else if (name == "--downsample") out.depth_downsample = base.depth_downsample;
        else if (name == "--dot-density") out.dot_density = base.dot_density;
        else if (name == "--surface-oversample") out.surface_oversample = base.surface_oversample;
        else if (name == "--repetitions") out.repetitions = base.repetitions;
        else if (name == "--light-samples") out.lighting.light_samples = base.lighting.light_samples;
        else if (name == "--light-size") out.lighting.light_size = base.lighting.light_size;
        else if (name == "--projector-intensity") out.lighting.projector_intensity = base.lighting.projector_intensity;
        else if (name == "--window-radius") out.match.window_radius = base.match.window_radius;
        else if (name == "--max-disparity") out.match.max_disparity = base.match.max_disparity;
        else if (name == "--uniqueness-ratio") out.match.uniqueness_ratio = base.match.uniqueness_ratio;
        else if (name == "--texture-threshold") out.match.texture_threshold = base.match.texture_threshold;
        else if (name == "--mode") out.mode = base.mode;
      }
      // Fields without a flag always come from the JSON.
      out.lighting.albedo = base.lighting.albedo;
      out.lighting.light_position = base.lighting.light_position;
      out.lighting.light_intensity = base.lighting.light_intensity;
      out.lighting.ambient = base.lighting.ambient;
      out.match.lr_consistency_tol = base.match.lr_consistency_tol;
      if (app->get_option("--mode")->count() > 0) out.mode = parse_generation_mode(mode);
    } else {
      out.mode = parse_generation_mode(mode);
    }
    out.validate();
    return out;
  }
};

struct TrainArgs {
  TrainConfig cfg;
  bool mixup = false;

  void add(CLI::App* app) {
    app->add_option("--lr", cfg.learning_rate)->capture_default_str();
    app->add_option("--weight-decay", cfg.weight_decay)->capture_default_str();
    app->add_option("--batch-size", cfg.batch_size)->capture_default_str();
    app->add_option("--epochs", cfg.epochs)->capture_default_str();
    app->add_flag("--mixup", mixup, "Augment batches with mixup samples");
  }
};

void echo_config(const CLI::App* app, const fs::path& out_dir) {
  std::ofstream f(out_dir / "effective_config.toml");
  f << app->config_to_str(true, false);
  if (!f) throw Error("cannot write " + (out_dir / "effective_config.toml").string());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string join(const std::vector<int>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? "," : "") << v[i];
  return s.str();
}

std::string join_pct(const std::vector<double>& v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    s << (i ? "," : "");
    if (std::isnan(v[i])) s << "nan";
    else s << 100.0 * v[i];
  }
  return s.str();
}

LabeledFeatures features_of(const DatasetManifest& m, int workers) {
  return make_labeled_features(load_clouds(m), static_cast<int>(m.class_names.size()), workers);
}

void print_evaluation(std::ostream& out, const std::string& prefix, const Evaluation& e) {
  out << prefix << "accuracy=" << std::fixed << std::setprecision(2) << 100.0 * e.accuracy
      << " samples=" << e.count << " per_class_accuracy=" << join_pct(e.per_class_accuracy) << '\n';
  for (Eigen::Index r = 0; r < e.confusion.rows(); ++r) {
    out << prefix << "confusion_row=" << r << " counts=";
    for (Eigen::Index c = 0; c < e.confusion.cols(); ++c) out << (c ? "," : "") << e.confusion(r, c);
    out << '\n';
  }
}

nlohmann::json evaluation_json(const Evaluation& e, const std::vector<std::string>& names) {
  nlohmann::json j;
  j["accuracy"] = e.accuracy;
  j["samples"] = e.count;
  j["class_names"] = names;
  auto& pc = j["per_class_accuracy"] = nlohmann::json::array();
  for (double a : e.per_class_accuracy) pc.push_back(std::isnan(a) ? nlohmann::json(nullptr) : nlohmann::json(a));
  auto& cm = j["confusion"] = nlohmann::json::array();
  for (Eigen::Index r = 0; r < e.confusion.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < e.confusion.cols(); ++c) row.push_back(e.confusion(r, c));
    cm.push_back(row);
  }
  return j;
}

void write_loss_log(const ClassifierModel& m, const fs::path& path) {
  std::ofstream f(path);
  for (std::size_t i = 0; i < m.meta.loss_curve.size(); ++i) {
    f << nlohmann::json{{"epoch", i}, {"loss", m.meta.loss_curve[i]}}.dump() << '\n';
  }
  f << nlohmann::json{{"train_accuracy", m.meta.train_accuracy}, {"mixup", m.meta.mixup}}.dump() << '\n';
  if (!f) throw Error("cannot write " + path.string());
}

void require_same_classes(const DatasetManifest& a, const DatasetManifest& b) {
  if (a.class_names != b.class_names) throw Error("manifests disagree on class names");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Active-stereo point cloud synthesis and self-training domain adaptation"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "Worker threads for generation and feature extraction")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "Synthesize a point cloud dataset from a mesh tree");
  gen->set_config("--config");
  fs::path gen_meshes, gen_out = default_out("generate");
  std::uint64_t gen_seed = 0;
  GenerationArgs gen_args;
  gen->add_option("--meshes", gen_meshes, "Directory with one subdirectory of meshes per class")
      ->required()
      ->check(CLI::ExistingDirectory);
  gen->add_option("--out", gen_out)->capture_default_str();
  gen->add_option("--seed", gen_seed)->required();
  gen_args.add(gen);

  // train
  auto* trn = app.add_subcommand("train", "Train the classifier on a dataset manifest");
  trn->set_config("--config");
  fs::path trn_data, trn_val, trn_out = default_out("train");
  TrainArgs trn_args;
  trn->add_option("--data", trn_data, "manifest.json")->required()->check(CLI::ExistingFile);
  trn->add_option("--val", trn_val, "Optional validation manifest")->check(CLI::ExistingFile);
  trn->add_option("--out", trn_out)->capture_default_str();
  trn->add_option("--seed", trn_args.cfg.seed)->required();
  trn_args.add(trn);

  // adapt
  auto* adp = app.add_subcommand("adapt", "Self-training adaptation from a labeled source to an unlabeled target");
  adp->set_config("--config");
  fs::path adp_source, adp_target, adp_checkpoint, adp_out = default_out("adapt");
  SelfTrainConfig st;
  TrainArgs adp_train;
  std::string method = "qbst";
  bool report_labels = false;
  adp->add_option("--source", adp_source, "Labeled source manifest")->check(CLI::ExistingFile);
  adp->add_option("--target", adp_target, "Target manifest (labels never used for training)")
      ->required()
      ->check(CLI::ExistingFile);
  adp->add_option("--checkpoint", adp_checkpoint, "Warm-up model; skips source training")->check(CLI::ExistingFile);
  adp->add_option("--out", adp_out)->capture_default_str();
  adp->add_option("--seed", st.seed)->required();
  adp->add_option("--method", method)->check(CLI::IsMember({"qbst", "spst", "cbst"}))->capture_default_str();
  adp->add_option("--theta0", st.theta_0)->capture_default_str();
  adp->add_option("--eps", st.epsilon)->capture_default_str();
  adp->add_option("--rounds", st.rounds)->capture_default_str();
  adp->add_option("--epochs-per-round", st.epochs_per_round)->capture_default_str();
  adp->add_option("--inner-lr", st.inner_learning_rate)->capture_default_str();
  adp->add_option("--inner-batch-size", st.inner_batch_size)->capture_default_str();
  adp->add_option("--cbst-proportion", st.cbst_proportion)->capture_default_str();
  adp->add_flag("--report-target-labels", report_labels,
                "Use target labels for per-round precision and accuracy diagnostics");
  adp_train.add(adp);

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint or a probability matrix");
  fs::path evl_model, evl_data, evl_probs, evl_probs_out, evl_json;
  evl->add_option("--data", evl_data, "Labeled manifest")->required()->check(CLI::ExistingFile);
  auto* evl_model_opt = evl->add_option("--model", evl_model)->check(CLI::ExistingFile);
  auto* evl_probs_opt = evl->add_option("--probs", evl_probs, "CSV with n rows × K probabilities")->check(CLI::ExistingFile);
  evl_model_opt->excludes(evl_probs_opt);
  evl->add_option("--probs-out", evl_probs_out, "Write predicted probabilities as CSV");
  evl->add_option("--json", evl_json, "Write metrics as JSON");

  // render-debug
  auto* dbg = app.add_subcommand("render-debug", "Write intermediate products for one mesh");
  dbg->set_config("--config");
  fs::path dbg_mesh, dbg_out = default_out("render-debug");
  std::uint64_t dbg_seed = 0;
  GenerationArgs dbg_args;
  dbg->add_option("--mesh", dbg_mesh)->required()->check(CLI::ExistingFile);
  dbg->add_option("--out", dbg_out)->capture_default_str();
  dbg->add_option("--seed", dbg_seed)->required();
  dbg_args.add(dbg);

  // shapes
  auto* shp = app.add_subcommand("shapes", "Write the primitive-shape mesh benchmark");
  fs::path shp_out = default_out("shapes");
  int per_class = 10;
  std::uint64_t shp_seed = 0;
  shp->add_option("--out", shp_out)->capture_default_str();
  shp->add_option("--per-class", per_class)->check(CLI::PositiveNumber)->capture_default_str();
  shp->add_option("--seed", shp_seed)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (*gen) {
      const GenerationConfig cfg = gen_args.resolve(gen);
      fs::create_directories(gen_out);
      const DatasetManifest m = generate_dataset(gen_meshes, gen_out, cfg, gen_seed, workers);
      echo_config(gen, gen_out);
      std::ofstream(gen_out / "generation_config.json") << to_json(cfg).dump(2) << '\n';
      out << "event=generate instances=" << m.entries.size() << " classes=" << m.class_names.size()
          << " mode=" << to_string(cfg.mode) << " manifest=" << (gen_out / "manifest.json").string()
          << " seconds=" << std::fixed << std::setprecision(2) << seconds_since(t0) << '\n';
      return 0;
    }

    if (*trn) {
      const DatasetManifest m = read_manifest(trn_data);
      const LabeledFeatures data = features_of(m, workers);
      MixupPool pool;
      if (trn_args.mixup) pool = build_mixup_pool(load_clouds(m), data.num_classes, derive_seed(trn_args.cfg.seed, "pool"), workers);
      const ClassifierModel model = train(data, trn_args.cfg, trn_args.mixup ? &pool : nullptr);
      fs::create_directories(trn_out);
      save_model(model, trn_out / "model.bin");
      write_loss_log(model, trn_out / "train_log.jsonl");
      echo_config(trn, trn_out);
      out << "event=train samples=" << data.size() << " classes=" << data.num_classes
          << " epochs=" << trn_args.cfg.epochs << " mixup=" << (model.meta.mixup ? 1 : 0)
          << " final_loss=" << std::setprecision(6)
          << (model.meta.loss_curve.empty() ? std::nan("") : model.meta.loss_curve.back())
          << " train_accuracy=" << std::fixed << std::setprecision(2) << 100.0 * model.meta.train_accuracy;
      if (!trn_val.empty()) {
        const DatasetManifest vm = read_manifest(trn_val);
        require_same_classes(m, vm);
        out << " val_accuracy=" << 100.0 * evaluate(model, features_of(vm, workers)).accuracy;
      }
      out << " seconds=" << seconds_since(t0) << '\n';
      return 0;
    }

    if (*adp) {
      st.method = parse_selection_method(method);
      st.validate();
      if (adp_checkpoint.empty() && adp_source.empty()) throw Error("adapt: need --source or --checkpoint");
      const DatasetManifest tm = read_manifest(adp_target);
      std::vector<int> target_labels = manifest_labels(tm);
      Matrix target = extract_feature_matrix(load_clouds(tm), workers);
      ClassifierModel warmup;
      if (!adp_checkpoint.empty()) {
        warmup = load_model(adp_checkpoint);
        if (warmup.num_classes != static_cast<int>(tm.class_names.size())) throw Error("adapt: checkpoint class count differs from target");
      } else {
        const DatasetManifest sm = read_manifest(adp_source);
        require_same_classes(sm, tm);
        const LabeledFeatures source = features_of(sm, workers);
        MixupPool pool;
        if (adp_train.mixup) pool = build_mixup_pool(load_clouds(sm), source.num_classes, derive_seed(adp_train.cfg.seed, "pool"), workers);
        adp_train.cfg.seed = derive_seed(st.seed, "warmup");
        warmup = train(source, adp_train.cfg, adp_train.mixup ? &pool : nullptr);
      }
      const SelfTrainResult r = self_train_from(warmup, target, st, adp_train.cfg, report_labels ? &target_labels : nullptr);
      fs::create_directories(adp_out);
      write_round_report(r.rounds, adp_out / "rounds.jsonl");
      save_model(r.warmup, adp_out / "warmup.bin");
      if (!r.selections.empty()) write_selection_csv(r.selections.back(), static_cast<std::size_t>(target.rows()), adp_out / "selection.csv");
      echo_config(adp, adp_out);
      for (const auto& rr : r.rounds) {
        out << "event=round round=" << rr.round << " theta=" << std::setprecision(6) << rr.theta
            << " L=" << rr.total_confident << " L_k=" << join(rr.confident_counts)
            << " selected=" << join(rr.selected_counts) << " entropy=" << rr.entropy;
        if (rr.accuracy) out << " accuracy=" << 100.0 * *rr.accuracy;
        out << '\n';
      }
      if (r.aborted) {
        err << "error=adapt_aborted message=\"" << r.message << "\"\n";
        return 3;
      }
      save_model(r.model, adp_out / "model.bin");
      out << "event=adapt method=" << to_string(st.method) << " rounds=" << r.rounds.size()
          << " seconds=" << std::fixed << std::setprecision(2) << seconds_since(t0) << '\n';
      return 0;
    }

    if (*evl) {
      if (evl_model.empty() && evl_probs.empty()) throw Error("eval: need --model or --probs");
      const DatasetManifest m = read_manifest(evl_data);
      const std::vector<int> labels = manifest_labels(m);
      Matrix probs;
      if (!evl_model.empty()) {
        const ClassifierModel model = load_model(evl_model);
        if (model.num_classes != static_cast<int>(m.class_names.size())) throw Error("eval: checkpoint class count differs from manifest");
        probs = model.predict_proba(extract_feature_matrix(load_clouds(m), workers));
      } else {
        probs = read_matrix_csv(evl_probs);
        if (probs.cols() != static_cast<Eigen::Index>(m.class_names.size())) throw Error("eval: probability columns differ from class count");
      }
      const Evaluation e = evaluate_probabilities(probs, labels);
      print_evaluation(out, "event=eval ", e);
      if (!evl_probs_out.empty()) write_matrix_csv(probs, evl_probs_out);
      if (!evl_json.empty()) {
        std::ofstream f(evl_json);
        f << evaluation_json(e, m.class_names).dump(2) << '\n';
        if (!f) throw Error("cannot write " + evl_json.string());
      }
      return 0;
    }

    if (*dbg) {
      const GenerationConfig cfg = dbg_args.resolve(dbg);
      if (cfg.mode == GenerationMode::surface) throw Error("render-debug: surface mode has no rendered artifacts");
      Rng rng(derive_seed(dbg_seed, "rotation"));
      const TriangleMesh mesh = preprocess_mesh(load_mesh(dbg_mesh), rng);
      InstanceArtifacts art;
      const PointCloud cloud = generate_instance(mesh, 0, cfg, dbg_seed, workers, &art);
      fs::create_directories(dbg_out);
      std::vector<std::string> written;
      auto record = [&](const fs::path& p) {
        if (!fs::exists(p) || fs::file_size(p) == 0) throw Error("render-debug: failed to write " + p.string());
        written.push_back(p.filename().string());
      };
      const ViewArtifacts& v = art.views.front();
      if (cfg.mode == GenerationMode::speckle) {
        write_png_gray(v.images.left, dbg_out / "left.png");
        record(dbg_out / "left.png");
        write_png_gray(v.images.right, dbg_out / "right.png");
        record(dbg_out / "right.png");
        write_png_rgb(false_color(v.disparity), dbg_out / "disparity.png");
        record(dbg_out / "disparity.png");
      }
      write_pfm(v.depth, dbg_out / "depth.pfm");
      record(dbg_out / "depth.pfm");
      write_ply(art.fused, dbg_out / "fused.ply");
      record(dbg_out / "fused.ply");
      echo_config(dbg, dbg_out);
      out << "event=render_debug mode=" << to_string(cfg.mode) << " views=" << art.views.size()
          << " fused_points=" << art.fused.size() << " sampled_points=" << cloud.size()
          << " files=" << written.size() << '\n';
      return 0;
    }

    if (*shp) {
      const auto classes = write_shape_benchmark(shp_out, per_class, shp_seed);
      out << "event=shapes classes=" << classes.size() << " per_class=" << per_class
          << " out=" << shp_out.string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error=" << std::quoted(e.what()) << '\n';
    return 1;
  }
  return 1;
}

}  // namespace stereosynth
