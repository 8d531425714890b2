#include "stereosynth/geometry.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

namespace stereosynth {
namespace {

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

// OBJ indices are 1-based; negative values count back from the latest vertex.
std::uint32_t resolve_obj_index(std::string_view token, std::size_t vertex_count,
                                std::size_t line_no) {
  auto slash = token.find('/');
  if (slash != std::string_view::npos) token = token.substr(0, slash);
  long long idx = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), idx);
  if (ec != std::errc() || idx == 0) {
    throw Error("obj: bad face index on line " + std::to_string(line_no));
  }
  long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(vertex_count) + idx;
  if (resolved < 0 || resolved >= static_cast<long long>(vertex_count)) {
    throw Error("obj: face index out of range on line " + std::to_string(line_no));
  }
  return static_cast<std::uint32_t>(resolved);
}

void append_polygon(const std::vector<std::uint32_t>& poly, std::vector<Face>& faces,
                    MeshLoadReport& report, const std::string& where) {
  if (poly.size() == 3) {
    faces.push_back({poly[0], poly[1], poly[2]});
  } else if (poly.size() == 4) {
    faces.push_back({poly[0], poly[1], poly[2]});
    faces.push_back({poly[0], poly[2], poly[3]});
    ++report.triangulated_quads;
  } else {
    throw Error(where + ": unsupported polygon with " + std::to_string(poly.size()) +
                " vertices (only triangles and quads)");
  }
}

void read_obj(std::istream& in, std::vector<Vec3>& vertices, std::vector<Face>& faces,
              MeshLoadReport& report) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::uint32_t> poly;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw Error("obj: malformed vertex on line " + std::to_string(line_no));
      }
      vertices.push_back(v);
    } else if (tag == "f") {
      poly.clear();
      std::string tok;
      while (ls >> tok) poly.push_back(resolve_obj_index(tok, vertices.size(), line_no));
      append_polygon(poly, faces, report, "obj line " + std::to_string(line_no));
    }
  }
}

void read_ascii_ply(std::istream& in, std::vector<Vec3>& vertices, std::vector<Face>& faces,
                    MeshLoadReport& report) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw Error("ply: missing magic");

  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (tag == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tag == "property") {
      if (elements.empty()) throw Error("ply: property before element");
      std::string type;
      ls >> type;
      std::string name;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> name;
        name = "list:" + name;
      } else {
        ls >> name;
      }
      elements.back().properties.push_back(name);
    } else if (tag == "end_header") {
      break;
    }
  }
  if (!ascii) throw Error("ply: only ASCII PLY is supported");

  std::vector<std::uint32_t> poly;
  for (const auto& e : elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1;
      for (int i = 0; i < static_cast<int>(e.properties.size()); ++i) {
        if (e.properties[i] == "x") ix = i;
        if (e.properties[i] == "y") iy = i;
        if (e.properties[i] == "z") iz = i;
      }
      if (ix < 0 || iy < 0 || iz < 0) throw Error("ply: vertex element lacks x/y/z");
      std::vector<double> vals(e.properties.size());
      for (std::size_t k = 0; k < e.count; ++k) {
        for (auto& v : vals) {
          if (!(in >> v)) throw Error("ply: truncated vertex data");
        }
        vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
      }
    } else if (e.name == "face") {
      for (std::size_t k = 0; k < e.count; ++k) {
        std::size_t n = 0;
        if (!(in >> n)) throw Error("ply: truncated face data");
        poly.resize(n);
        for (auto& idx : poly) {
          long long v = 0;
          if (!(in >> v) || v < 0) throw Error("ply: bad face index");
          idx = static_cast<std::uint32_t>(v);
        }
        // Any further per-face scalar properties are skipped.
        for (std::size_t p = 1; p < e.properties.size(); ++p) {
          double skip;
          in >> skip;
        }
        append_polygon(poly, faces, report, "ply face " + std::to_string(k));
      }
    } else {
      // Unknown element: skip its lines.
      std::getline(in, line);
      for (std::size_t k = 0; k < e.count; ++k) std::getline(in, line);
    }
  }
}

}  // namespace

TriangleMesh load_mesh(const std::filesystem::path& path, MeshLoadReport* report_out) {
  std::ifstream in(path);
  if (!in) throw Error("load_mesh: cannot open " + path.string());

  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  MeshLoadReport report;
  const std::string ext = lowercase_extension(path);
  if (ext == ".obj") {
    read_obj(in, vertices, faces, report);
  } else if (ext == ".ply") {
    read_ascii_ply(in, vertices, faces, report);
  } else {
    throw Error("load_mesh: unsupported file type " + ext);
  }

  TriangleMesh mesh = TriangleMesh::build(std::move(vertices), std::move(faces), &report.dropped_faces);
  if (mesh.empty()) throw Error("load_mesh: no valid faces in " + path.string());
  if (report.dropped_faces > 0) {
    std::clog << "mesh_load path=" << path.string() << " dropped_faces=" << report.dropped_faces
              << '\n';
  }
  if (report_out) *report_out = report;
  return mesh;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_obj: cannot open " + path.string());
  out.precision(17);
  for (const auto& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces()) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw Error("write_obj: write failed for " + path.string());
}

}  // namespace stereosynth
