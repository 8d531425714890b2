#include "stereosynth/synth.hpp"

#include <cstdio>

namespace stereosynth {

std::vector<std::string> write_shape_benchmark(const std::filesystem::path& out_dir, int per_class,
                                               std::uint64_t seed) {
  if (per_class < 1) throw Error("write_shape_benchmark: per_class must be positive");
  const std::vector<std::string> classes = {"box", "cone", "cylinder", "sphere"};
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto dir = out_dir / classes[k];
    std::filesystem::create_directories(dir);
    Rng rng(derive_seed(seed, classes[k]));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    for (int i = 0; i < per_class; ++i) {
      TriangleMesh mesh;
      switch (k) {
        case 0: mesh = make_box({range(0.4, 1.0), range(0.4, 1.0), range(0.4, 1.0)}); break;
        case 1: mesh = make_cone(range(0.25, 0.5), range(0.5, 1.2), 48); break;
        case 2: mesh = make_cylinder(range(0.2, 0.5), range(0.5, 1.2), 48); break;
        default: mesh = make_ellipsoid({range(0.35, 0.5), range(0.35, 0.5), range(0.35, 0.5)}, 48, 24); break;
      }
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%03d.obj", classes[k].c_str(), i);
      write_obj(mesh, dir / name);
    }
  }
  return classes;
}

}  // namespace stereosynth
