#include "stereosynth/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <bit>
#include <memory>

namespace stereosynth {

static_assert(std::endian::native == std::endian::little, "PFM I/O assumes a little-endian host");
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

void write_png(const std::filesystem::path& path, int width, int height, int color_type,
               int channels, const std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw Error("png: cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Piecewise-linear "jet"-style colormap.
std::array<std::uint8_t, 3> colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto channel = [](double x) { return to_byte(std::clamp(1.5 - std::abs(4.0 * x), 0.0, 1.0)); };
  return {channel(t - 0.75), channel(t - 0.5), channel(t - 0.25)};
}

}  // namespace

std::size_t MaskedField::valid_count() const {
  std::size_t n = 0;
  for (auto v : valid.data) n += v != 0;
  return n;
}

void write_png_gray(const GrayImage& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) bytes[i] = to_byte(image.data[i]);
  write_png(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 1, bytes);
}

void write_png_rgb(const Image<std::array<std::uint8_t, 3>>& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes(image.size() * 3);
  for (std::size_t i = 0; i < image.size(); ++i) {
    std::memcpy(bytes.data() + 3 * i, image.data[i].data(), 3);
  }
  write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 3, bytes);
}

GrayImage read_png_gray(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw Error("png: cannot read " + path.string());
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error("png: decode failed for " + path.string());
  }
  GrayImage out(static_cast<int>(img.width), static_cast<int>(img.height));
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = bytes[i] / 255.0f;
  return out;
}

Image<std::array<std::uint8_t, 3>> false_color(const MaskedField& field) {
  Image<std::array<std::uint8_t, 3>> out(field.width(), field.height(), {0, 0, 0});
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    if (!field.valid.data[i]) continue;
    lo = std::min(lo, field.values.data[i]);
    hi = std::max(hi, field.values.data[i]);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    if (field.valid.data[i]) out.data[i] = colormap((field.values.data[i] - lo) / span);
  }
  return out;
}

void write_pfm(const MaskedField& field, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("pfm: cannot open " + path.string());
  out << "Pf\n" << field.width() << ' ' << field.height() << "\n-1.0\n";
  // PFM scanlines run bottom to top.
  std::vector<float> row(static_cast<std::size_t>(field.width()));
  for (int y = field.height() - 1; y >= 0; --y) {
    for (int x = 0; x < field.width(); ++x) {
      row[x] = static_cast<float>(field.values.at(x, y));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error("pfm: write failed for " + path.string());
}

Image<float> read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("pfm: cannot open " + path.string());
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != "Pf" || w <= 0 || h <= 0) throw Error("pfm: unsupported header in " + path.string());
  if (scale > 0.0) throw Error("pfm: big-endian files are not supported");
  Image<float> out(w, h);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(out.row(y)), static_cast<std::streamsize>(w * sizeof(float)));
  }
  if (!in) throw Error("pfm: truncated " + path.string());
  return out;
}

}  // namespace stereosynth
