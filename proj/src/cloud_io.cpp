#include "stereosynth/pointcloud.hpp"

#include <bit>
#include <fstream>
#include <sstream>

namespace stereosynth {

static_assert(std::endian::native == std::endian::little,
              "binary cloud I/O assumes a little-endian host");

void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_ply: cannot open " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  out.precision(9);
  for (const auto& p : cloud.points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  if (!out) throw Error("write_ply: write failed for " + path.string());
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_ply: cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  bool ascii = false;
  std::size_t n_props = 0;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (tag == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (tag == "property" && in_vertex) {
      ++n_props;
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error("read_ply: only ASCII PLY is supported");
  if (n_props < 3) throw Error("read_ply: vertex element needs x y z");
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    if (!(in >> p.x() >> p.y() >> p.z())) throw Error("read_ply: truncated " + path.string());
    for (std::size_t k = 3; k < n_props; ++k) {
      double skip;
      in >> skip;
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

void write_cloud_binary(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_cloud_binary: cannot open " + path.string());
  const auto count = static_cast<std::uint32_t>(cloud.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  std::vector<float> payload;
  payload.reserve(cloud.size() * 3);
  for (const auto& p : cloud.points) {
    payload.push_back(static_cast<float>(p.x()));
    payload.push_back(static_cast<float>(p.y()));
    payload.push_back(static_cast<float>(p.z()));
  }
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw Error("write_cloud_binary: write failed for " + path.string());
}

PointCloud read_cloud_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_cloud_binary: cannot open " + path.string());
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in) throw Error("read_cloud_binary: missing header in " + path.string());
  std::vector<float> payload(static_cast<std::size_t>(count) * 3);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!in) throw Error("read_cloud_binary: truncated payload in " + path.string());
  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    cloud.points.emplace_back(payload[3 * i], payload[3 * i + 1], payload[3 * i + 2]);
  }
  return cloud;
}

}  // namespace stereosynth
