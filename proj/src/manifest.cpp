#include "stereosynth/synth.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <set>

namespace stereosynth {
namespace fs = std::filesystem;

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  nlohmann::json j;
  j["format"] = "stereosynth-manifest";
  j["version"] = 1;
  j["class_names"] = manifest.class_names;
  j["config"] = manifest.config;
  auto& entries = j["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id},
                       {"class_index", e.class_index},
                       {"class_name", e.class_name},
                       {"mesh", e.mesh_path},
                       {"cloud", e.cloud_path},
                       {"seed", e.seed},
                       {"mode", e.mode}});
  }
  std::ofstream out(path);
  if (!out) throw Error("write_manifest: cannot open " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write_manifest: write failed for " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_manifest: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("read_manifest: " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.root = path.parent_path();
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  if (j.contains("config")) m.config = j.at("config");
  for (const auto& e : j.at("entries")) {
    ManifestEntry entry;
    entry.id = e.at("id").get<std::string>();
    entry.class_index = e.at("class_index").get<int>();
    entry.class_name = e.value("class_name", std::string{});
    entry.mesh_path = e.value("mesh", std::string{});
    entry.cloud_path = e.at("cloud").get<std::string>();
    entry.seed = e.value("seed", std::uint64_t{0});
    entry.mode = e.value("mode", std::string{});
    if (entry.class_index < 0 || entry.class_index >= static_cast<int>(m.class_names.size())) {
      throw Error("read_manifest: class index out of range for " + entry.id);
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

std::vector<PointCloud> load_clouds(const DatasetManifest& manifest) {
  std::vector<PointCloud> clouds;
  clouds.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    PointCloud c = read_cloud_binary(manifest.root / e.cloud_path);
    c.label = e.class_index;
    clouds.push_back(std::move(c));
  }
  return clouds;
}

std::vector<int> manifest_labels(const DatasetManifest& manifest) {
  std::vector<int> labels;
  labels.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) labels.push_back(e.class_index);
  return labels;
}

namespace {

bool is_mesh_file(const fs::path& p) {
  std::string ext = p.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".obj" || ext == ".ply";
}

struct Job {
  ManifestEntry entry;
  fs::path mesh_file;
};

}  // namespace

DatasetManifest generate_dataset(const fs::path& mesh_dir, const fs::path& out_dir,
                                 const GenerationConfig& cfg, std::uint64_t seed, int workers) {
  cfg.validate();
  if (!fs::is_directory(mesh_dir)) throw Error("generate_dataset: no such directory " + mesh_dir.string());

  std::vector<fs::path> class_dirs;
  for (const auto& d : fs::directory_iterator(mesh_dir)) {
    if (d.is_directory()) class_dirs.push_back(d.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw Error("generate_dataset: no class subdirectories in " + mesh_dir.string());

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.config = to_json(cfg);
  std::vector<Job> jobs;
  std::set<std::string> ids;
  for (std::size_t k = 0; k < class_dirs.size(); ++k) {
    const std::string class_name = class_dirs[k].filename().string();
    manifest.class_names.push_back(class_name);
    std::vector<fs::path> meshes;
    for (const auto& f : fs::directory_iterator(class_dirs[k])) {
      if (f.is_regular_file() && is_mesh_file(f.path())) meshes.push_back(f.path());
    }
    std::sort(meshes.begin(), meshes.end());
    if (meshes.empty()) throw Error("generate_dataset: class directory " + class_dirs[k].string() + " has no meshes");
    for (const auto& mesh : meshes) {
      for (int rep = 0; rep < cfg.repetitions; ++rep) {
        const std::string stem = mesh.stem().string() + "_r" + std::to_string(rep);
        Job job;
        job.mesh_file = mesh;
        job.entry.id = class_name + "/" + stem;
        job.entry.class_index = static_cast<int>(k);
        job.entry.class_name = class_name;
        job.entry.mesh_path = mesh.string();
        job.entry.cloud_path = (fs::path("clouds") / class_name / (stem + ".bin")).generic_string();
        job.entry.seed = derive_seed(seed, job.entry.id);
        job.entry.mode = to_string(cfg.mode);
        if (!ids.insert(job.entry.id).second) {
          throw Error("generate_dataset: duplicate instance id " + job.entry.id);
        }
        jobs.push_back(std::move(job));
      }
    }
  }

  std::error_code ec;
  for (const auto& name : manifest.class_names) {
    fs::create_directories(out_dir / "clouds" / name, ec);
    if (ec) throw Error("generate_dataset: cannot create " + (out_dir / "clouds" / name).string());
  }

  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    try {
      Rng rng(derive_seed(job.entry.seed, "rotation"));
      const TriangleMesh mesh = preprocess_mesh(load_mesh(job.mesh_file), rng);
      const PointCloud cloud = generate_instance(mesh, job.entry.class_index, cfg, job.entry.seed, 1);
      write_cloud_binary(cloud, out_dir / job.entry.cloud_path);
    } catch (const std::exception& e) {
      throw Error("instance " + job.entry.id + " (" + job.mesh_file.string() + "): " + e.what());
    }
  });

  for (auto& job : jobs) manifest.entries.push_back(std::move(job.entry));
  write_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

}  // namespace stereosynth
