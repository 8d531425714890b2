#include "stereosynth/classify.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace stereosynth {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[8] = {'S', 'S', 'C', 'L', 'F', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_doubles(std::ostream& out, const double* p, Eigen::Index n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("load_model: truncated checkpoint");
  return v;
}

void get_doubles(std::istream& in, double* p, Eigen::Index n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw Error("load_model: truncated checkpoint");
}

}  // namespace

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_model: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::int32_t>(out, model.num_classes);
  put<std::int32_t>(out, model.dim);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.feature_spec.size()));
  out.write(model.feature_spec.data(), static_cast<std::streamsize>(model.feature_spec.size()));
  put_doubles(out, model.mean.data(), model.mean.size());
  put_doubles(out, model.scale.data(), model.scale.size());
  put_doubles(out, model.weights.data(), model.weights.size());
  put_doubles(out, model.bias.data(), model.bias.size());
  put<std::uint64_t>(out, model.meta.seed);
  put<std::int32_t>(out, model.meta.epochs);
  put<std::uint8_t>(out, model.meta.mixup ? 1 : 0);
  put<double>(out, model.meta.train_accuracy);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.meta.loss_curve.size()));
  put_doubles(out, model.meta.loss_curve.data(), static_cast<Eigen::Index>(model.meta.loss_curve.size()));
  if (!out) throw Error("save_model: write failed for " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_model: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error("load_model: not a checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw Error("load_model: unsupported version " + std::to_string(version));
  ClassifierModel m;
  m.num_classes = get<std::int32_t>(in);
  m.dim = get<std::int32_t>(in);
  if (m.num_classes < 1 || m.dim < 1 || m.num_classes > 1 << 16 || m.dim > 1 << 20) {
    throw Error("load_model: implausible dimensions");
  }
  const auto spec_len = get<std::uint32_t>(in);
  if (spec_len > 4096) throw Error("load_model: implausible feature spec length");
  m.feature_spec.resize(spec_len);
  in.read(m.feature_spec.data(), spec_len);
  m.mean.resize(m.dim);
  m.scale.resize(m.dim);
  m.weights.resize(m.dim, m.num_classes);
  m.bias.resize(m.num_classes);
  get_doubles(in, m.mean.data(), m.mean.size());
  get_doubles(in, m.scale.data(), m.scale.size());
  get_doubles(in, m.weights.data(), m.weights.size());
  get_doubles(in, m.bias.data(), m.bias.size());
  m.meta.seed = get<std::uint64_t>(in);
  m.meta.epochs = get<std::int32_t>(in);
  m.meta.mixup = get<std::uint8_t>(in) != 0;
  m.meta.train_accuracy = get<double>(in);
  const auto curve = get<std::uint32_t>(in);
  if (curve > 1u << 24) throw Error("load_model: implausible loss curve length");
  m.meta.loss_curve.resize(curve);
  get_doubles(in, m.meta.loss_curve.data(), curve);
  m.validate();
  return m;
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("write_matrix_csv: cannot open " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
  if (!out) throw Error("write_matrix_csv: write failed for " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("read_matrix_csv: cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error("read_matrix_csv: bad number '" + cell + "' at line " + std::to_string(line_no));
      }
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw Error("read_matrix_csv: ragged row at line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

}  // namespace stereosynth
