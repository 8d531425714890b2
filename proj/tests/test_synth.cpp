#include "stereosynth/synth.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

using namespace stereosynth;

namespace {

GenerationConfig small_config() {
  GenerationConfig c;
  c.render_width = c.render_height = 200;
  c.focal_length_px = 200.0;
  c.depth_downsample = 2;
  c.fps_points = 256;
  c.match.max_disparity = 16;
  c.match.window_radius = 3;
  c.lighting.light_samples = 4;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("camera poses look at the object from the configured shell") {
  GenerationConfig cfg;
  cfg.n_views = 5;
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto poses = sample_camera_poses(rng, cfg);
    REQUIRE(poses.size() == 5);
    const Vec3 eye = poses[0].translation;
    CHECK(eye.norm() >= 3.0);
    CHECK(eye.norm() <= 5.0);
    const double el = std::asin(eye.z() / eye.norm()) * 180.0 / std::numbers::pi;
    CHECK(el >= 20.0 - 1e-9);
    CHECK(el <= 50.0 + 1e-9);
    const Vec3 c = poses[0].apply_inverse(Vec3::Zero());
    CHECK(c.head<2>().norm() < 1e-9);
    for (std::size_t v = 1; v < poses.size(); ++v) {
      CHECK(poses[v].is_valid(1e-9));
      CHECK(((poses[v].translation - eye).array().abs() <= 0.1).all());
      const Mat3 rel = poses[0].rotation.transpose() * poses[v].rotation;
      CHECK(std::acos(std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0)) < 0.1 * std::sqrt(3.0) + 1e-9);
    }
  }
  Rng a(3), b(3);
  CHECK(sample_camera_poses(a, cfg)[2].rotation == sample_camera_poses(b, cfg)[2].rotation);
}

TEST_CASE("surface sampling lies on the mesh") {
  const auto sphere = make_uv_sphere(0.5, 128, 64);
  Rng rng(2);
  const auto c = sample_surface(sphere, 2000, rng);
  CHECK(c.size() == 2000);
  for (const auto& p : c.points) {
    CHECK(p.norm() <= 0.5 + 1e-9);
    CHECK(p.norm() >= 0.499);
  }
}

TEST_CASE("config JSON round trip and validation") {
  GenerationConfig c = small_config();
  c.mode = GenerationMode::clean;
  c.lighting.light_position = Vec3(1, 2, 3);
  const auto back = generation_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(generation_config_from_json(nlohmann::json::object()).fps_points == 2048);
  GenerationConfig bad = c;
  bad.depth_downsample = 3;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(parse_generation_mode("lidar"), Error);
}

TEST_CASE("clean and speckle modes share poses but differ in points") {
  const auto mesh = normalize_to_unit_cube(make_box({1.0, 0.8, 0.6}));
  GenerationConfig cfg = small_config();
  InstanceArtifacts speckle_art, clean_art;
  const auto speckle = generate_instance(mesh, 1, cfg, 99, 1, &speckle_art);
  cfg.mode = GenerationMode::clean;
  const auto clean = generate_instance(mesh, 1, cfg, 99, 1, &clean_art);
  REQUIRE(speckle_art.views.size() == clean_art.views.size());
  for (std::size_t v = 0; v < clean_art.views.size(); ++v) {
    CHECK(speckle_art.views[v].pose.rotation == clean_art.views[v].pose.rotation);
    CHECK(speckle_art.views[v].pose.translation == clean_art.views[v].pose.translation);
  }
  CHECK(speckle.size() == 256);
  CHECK(clean.size() == 256);
  CHECK(speckle.points != clean.points);
  CHECK(clean.label == 1);
  CHECK(clean_art.views[0].images.left.size() == 0);
  // Same seed, same output.
  cfg.mode = GenerationMode::speckle;
  CHECK(generate_instance(mesh, 1, cfg, 99).points == speckle.points);
}

TEST_CASE("clean-mode points lie on the surface") {
  const auto mesh = normalize_to_unit_cube(make_uv_sphere(1.0, 128, 64));
  GenerationConfig cfg = small_config();
  cfg.mode = GenerationMode::clean;
  const auto c = generate_instance(mesh, 0, cfg, 5);
  for (const auto& p : c.points) CHECK(std::abs(p.norm() - 0.5) < 1e-3);
}

TEST_CASE("too few points is an error naming the counts") {
  const auto mesh = normalize_to_unit_cube(make_box({1, 1, 1}));
  GenerationConfig cfg = small_config();
  cfg.fps_points = 1000000;
  cfg.mode = GenerationMode::clean;
  CHECK_THROWS_WITH_AS(generate_instance(mesh, 0, cfg, 1), doctest::Contains("need 1000000"), Error);
}

TEST_CASE("dataset generation is deterministic across worker counts") {
  TempDir dir("dataset");
  const auto meshes = dir.path / "meshes";
  write_shape_benchmark(meshes, 1, 3);
  GenerationConfig cfg = small_config();
  const auto m1 = generate_dataset(meshes, dir.path / "a", cfg, 21, 1);
  const auto m2 = generate_dataset(meshes, dir.path / "b", cfg, 21, 3);
  CHECK(m1.class_names == std::vector<std::string>{"box", "cone", "cylinder", "sphere"});
  REQUIRE(m1.entries.size() == 4);
  CHECK(slurp(dir.path / "a" / "manifest.json") == slurp(dir.path / "b" / "manifest.json"));
  for (const auto& e : m1.entries) {
    CHECK(slurp(dir.path / "a" / e.cloud_path) == slurp(dir.path / "b" / e.cloud_path));
  }
  const auto read = read_manifest(dir.path / "a" / "manifest.json");
  CHECK(read.entries.size() == 4);
  CHECK(read.entries[2].class_name == "cylinder");
  const auto clouds = load_clouds(read);
  CHECK(clouds[3].label == 3);
  CHECK(clouds[3].size() == 256);
  CHECK(manifest_labels(read) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("dataset generation failures leave no manifest") {
  TempDir dir("dataset_fail");
  CHECK_THROWS_AS(generate_dataset(dir.path / "nope", dir.path / "out", small_config(), 1), Error);
  CHECK_FALSE(std::filesystem::exists(dir.path / "out" / "manifest.json"));

  const auto meshes = dir.path / "meshes";
  std::filesystem::create_directories(meshes / "a");
  write_obj(make_box({1, 1, 1}), meshes / "a" / "good.obj");
  std::filesystem::create_directories(meshes / "b");
  std::ofstream(meshes / "b" / "bad.obj") << "v 0 0 0\n";
  CHECK_THROWS_AS(generate_dataset(meshes, dir.path / "out", small_config(), 1), Error);
  CHECK_FALSE(std::filesystem::exists(dir.path / "out" / "manifest.json"));
}

}  // TEST_SUITE
