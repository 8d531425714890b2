#pragma once

#include "stereosynth/common.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace stereosynth {

/// Row-major W×H raster.
template <class T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  T* row(int y) { return data.data() + static_cast<std::size_t>(y) * width; }
  const T* row(int y) const { return data.data() + static_cast<std::size_t>(y) * width; }
  std::size_t size() const { return data.size(); }
  bool same_shape(int w, int h) const { return width == w && height == h; }
};

/// Intensities in [0, 1].
using GrayImage = Image<float>;

/// Per-pixel scalar with a validity mask. Invalid pixels hold `invalid_value`.
struct MaskedField {
  Image<double> values;
  Image<std::uint8_t> valid;

  MaskedField() = default;
  MaskedField(int w, int h, double invalid_value)
      : values(w, h, invalid_value), valid(w, h, 0) {}

  int width() const { return values.width; }
  int height() const { return values.height; }
  bool is_valid(int x, int y) const { return valid.at(x, y) != 0; }
  std::size_t valid_count() const;
};

/// Subpixel disparities; invalid pixels carry -1.
struct DisparityMap : MaskedField {
  static constexpr double kInvalid = -1.0;
  DisparityMap() = default;
  DisparityMap(int w, int h) : MaskedField(w, h, kInvalid) {}
  void set(int x, int y, double d) {
    values.at(x, y) = d;
    valid.at(x, y) = 1;
  }
};

/// Metric depth along the optical axis; invalid pixels carry 0.
struct DepthMap : MaskedField {
  static constexpr double kInvalid = 0.0;
  DepthMap() = default;
  DepthMap(int w, int h) : MaskedField(w, h, kInvalid) {}
  void set(int x, int y, double z) {
    values.at(x, y) = z;
    valid.at(x, y) = 1;
  }
};

// 8-bit PNG writers (values clamped to [0,1]).
void write_png_gray(const GrayImage& image, const std::filesystem::path& path);
void write_png_rgb(const Image<std::array<std::uint8_t, 3>>& image, const std::filesystem::path& path);
/// Reads an 8-bit grayscale (or RGB, converted by luma) PNG.
GrayImage read_png_gray(const std::filesystem::path& path);

/// False-colour rendering of a masked field; invalid pixels are black.
Image<std::array<std::uint8_t, 3>> false_color(const MaskedField& field);

/// Little-endian single-channel PFM. Invalid pixels are written as their
/// sentinel value (never NaN).
void write_pfm(const MaskedField& field, const std::filesystem::path& path);
Image<float> read_pfm(const std::filesystem::path& path);

}  // namespace stereosynth
