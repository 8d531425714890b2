#include "stereosynth/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stereosynth {

void MatchParams::validate() const {
  if (window_radius < 1) throw Error("match params: window_radius must be >= 1");
  if (max_disparity < 1) throw Error("match params: max_disparity must be >= 1");
  if (!(uniqueness_ratio > 1.0)) throw Error("match params: uniqueness_ratio must be > 1");
  if (lr_consistency_tol < 0) throw Error("match params: lr_consistency_tol must be >= 0");
}

namespace {

constexpr std::int32_t kNoCost = std::numeric_limits<std::int32_t>::max();
constexpr int kStripRows = 32;

Image<std::uint8_t> quantize(const GrayImage& img) {
  Image<std::uint8_t> out(img.width, img.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return out;
}

// Summed-area tables of I and I^2 for window variance.
struct Integral {
  int w = 0, h = 0;
  std::vector<double> sum, sum_sq;

  explicit Integral(const GrayImage& img) : w(img.width), h(img.height) {
    sum.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
    sum_sq.assign(sum.size(), 0.0);
    for (int y = 0; y < h; ++y) {
      double row = 0.0, row_sq = 0.0;
      for (int x = 0; x < w; ++x) {
        const double v = img.at(x, y);
        row += v;
        row_sq += v * v;
        sum[idx(x + 1, y + 1)] = sum[idx(x + 1, y)] + row;
        sum_sq[idx(x + 1, y + 1)] = sum_sq[idx(x + 1, y)] + row_sq;
      }
    }
  }
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * (w + 1) + x; }
  double box(const std::vector<double>& t, int x0, int y0, int x1, int y1) const {
    return t[idx(x1 + 1, y1 + 1)] - t[idx(x0, y1 + 1)] - t[idx(x1 + 1, y0)] + t[idx(x0, y0)];
  }
  double variance(int cx, int cy, int r) const {
    const double n = static_cast<double>((2 * r + 1) * (2 * r + 1));
    const double m = box(sum, cx - r, cy - r, cx + r, cy + r) / n;
    return std::max(0.0, box(sum_sq, cx - r, cy - r, cx + r, cy + r) / n - m * m);
  }
};

}  // namespace

DisparityMap block_match(const GrayImage& left, const GrayImage& right, const MatchParams& params,
                         int workers) {
  params.validate();
  if (!right.same_shape(left.width, left.height)) {
    throw Error("block_match: left and right images differ in resolution");
  }
  const int w = left.width, h = left.height, r = params.window_radius;
  const int D = params.max_disparity;
  DisparityMap out(w, h);
  if (w < 2 * r + 1 || h < 2 * r + 1) return out;

  const Image<std::uint8_t> L = quantize(left);
  const Image<std::uint8_t> R = quantize(right);
  const Integral integral(left);

  // Which interior pixels carry enough texture to be matched at all.
  Image<std::uint8_t> textured(w, h, 0);
  std::vector<std::uint8_t> row_has_texture(static_cast<std::size_t>(h), 0);
  for (int y = r; y < h - r; ++y) {
    for (int x = r; x < w - r; ++x) {
      if (integral.variance(x, y, r) >= params.texture_threshold) {
        textured.at(x, y) = 1;
        row_has_texture[y] = 1;
      }
    }
  }

  const int first_row = r, last_row = h - 1 - r;
  const int n_strips = (last_row - first_row + kStripRows) / kStripRows;
  const std::size_t plane = static_cast<std::size_t>(w);

  parallel_for(static_cast<std::size_t>(n_strips), workers, [&](std::size_t strip) {
    const int y_begin = first_row + static_cast<int>(strip) * kStripRows;
    const int y_end = std::min(last_row + 1, y_begin + kStripRows);
    bool any = false;
    for (int y = y_begin; y < y_end; ++y) any = any || row_has_texture[y];
    if (!any) return;

    // colsum[d][x] = Σ_{dy} |L(x, y+dy) - R(x-d, y+dy)|, maintained incrementally
    // down the strip. Integer sums keep results independent of strip layout.
    std::vector<std::int32_t> colsum((D + 1) * plane, 0);
    std::vector<std::int32_t> cost((D + 1) * plane, kNoCost);
    auto absdiff = [&](int x, int y, int d) -> std::int32_t {
      return std::abs(static_cast<std::int32_t>(L.at(x, y)) - static_cast<std::int32_t>(R.at(x - d, y)));
    };
    for (int d = 0; d <= D; ++d) {
      std::int32_t* cs = colsum.data() + d * plane;
      for (int dy = -r; dy <= r; ++dy) {
        for (int x = d; x < w; ++x) cs[x] += absdiff(x, y_begin + dy, d);
      }
    }

    std::vector<int> right_best(plane);
    for (int y = y_begin; y < y_end; ++y) {
      if (y > y_begin) {
        for (int d = 0; d <= D; ++d) {
          std::int32_t* cs = colsum.data() + d * plane;
          for (int x = d; x < w; ++x) cs[x] += absdiff(x, y + r, d) - absdiff(x, y - r - 1, d);
        }
      }
      if (!row_has_texture[y]) continue;

      // cost[d][x] for window centres x in [r + d, w - 1 - r].
      for (int d = 0; d <= D; ++d) {
        const std::int32_t* cs = colsum.data() + d * plane;
        std::int32_t* c = cost.data() + d * plane;
        std::fill(c, c + plane, kNoCost);
        const int x_lo = r + d;
        if (x_lo > w - 1 - r) continue;
        std::int32_t acc = 0;
        for (int x = x_lo - r; x <= x_lo + r; ++x) acc += cs[x];
        c[x_lo] = acc;
        for (int x = x_lo + 1; x <= w - 1 - r; ++x) {
          acc += cs[x + r] - cs[x - r - 1];
          c[x] = acc;
        }
      }
      auto C = [&](int d, int x) { return cost[d * plane + x]; };

      // Right-view winner for each right pixel xr: argmin_d C(d, xr + d).
      for (int xr = 0; xr < w; ++xr) {
        std::int32_t best = kNoCost;
        int best_d = -1;
        for (int d = 0; d <= D && xr + d < w; ++d) {
          const std::int32_t c = C(d, xr + d);
          if (c < best) {
            best = c;
            best_d = d;
          }
        }
        right_best[xr] = best_d;
      }

      for (int x = r; x < w - r; ++x) {
        if (!textured.at(x, y)) continue;
        std::int32_t best = kNoCost;
        int best_d = -1;
        for (int d = 0; d <= D; ++d) {
          const std::int32_t c = C(d, x);
          if (c < best) {
            best = c;
            best_d = d;
          }
        }
        if (best_d < 0) continue;

        std::int32_t second = kNoCost;
        for (int d = 0; d <= D; ++d) {
          if (std::abs(d - best_d) <= 1) continue;
          second = std::min(second, C(d, x));
        }
        if (second != kNoCost &&
            static_cast<double>(second) < params.uniqueness_ratio * static_cast<double>(best)) {
          continue;
        }

        const int xr = x - best_d;
        if (right_best[xr] < 0 || std::abs(right_best[xr] - best_d) > params.lr_consistency_tol) {
          continue;
        }

        double disparity = best_d;
        // A zero SAD is the global minimum of a nonnegative cost, so the
        // integer disparity is already exact.
        if (best > 0 && best_d > 0 && best_d < D) {
          const std::int32_t cm = C(best_d - 1, x), cp = C(best_d + 1, x);
          if (cm != kNoCost && cp != kNoCost) {
            const double denom = static_cast<double>(cm) - 2.0 * best + cp;
            if (denom > 0.0) {
              disparity += std::clamp(0.5 * (cm - cp) / denom, -0.5, 0.5);
            }
          }
        }
        out.set(x, y, disparity);
      }
    }
  });
  return out;
}

DepthMap disparity_to_depth(const DisparityMap& disparity, double focal_px, double baseline_m,
                            double min_disparity) {
  if (!(focal_px > 0.0) || !(baseline_m > 0.0)) {
    throw Error("disparity_to_depth: focal length and baseline must be positive");
  }
  const double fb = focal_px * baseline_m;
  DepthMap depth(disparity.width(), disparity.height());
  for (std::size_t i = 0; i < disparity.values.size(); ++i) {
    const double d = disparity.values.data[i];
    if (!disparity.valid.data[i] || !(d > min_disparity)) continue;
    depth.values.data[i] = fb / d;
    depth.valid.data[i] = 1;
  }
  return depth;
}

PointCloud backproject(const DepthMap& depth, const CameraIntrinsics& intrinsics,
                       const RigidPose& pose) {
  if (!depth.values.same_shape(intrinsics.width, intrinsics.height)) {
    throw Error("backproject: depth map does not match intrinsics resolution");
  }
  PointCloud cloud;
  cloud.points.reserve(depth.valid_count());
  const double f = intrinsics.focal_length_px;
  const double cx = intrinsics.principal_point.x(), cy = intrinsics.principal_point.y();
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!depth.is_valid(x, y)) continue;
      const double z = depth.values.at(x, y);
      const Vec3 p_cam((x - cx) * z / f, (y - cy) * z / f, z);
      cloud.points.push_back(pose.apply(p_cam));
    }
  }
  if (cloud.points.empty()) throw Error("backproject: depth map has no valid pixels");
  return cloud;
}

DepthMap downsample_depth(const DepthMap& depth, int factor) {
  if (factor < 1 || depth.width() % factor != 0 || depth.height() % factor != 0) {
    throw Error("downsample_depth: factor " + std::to_string(factor) +
                " does not divide the depth map resolution");
  }
  const int ow = depth.width() / factor, oh = depth.height() / factor;
  DepthMap out(ow, oh);
  const int block = factor * factor;
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(block));
  for (int by = 0; by < oh; ++by) {
    for (int bx = 0; bx < ow; ++bx) {
      vals.clear();
      for (int y = by * factor; y < (by + 1) * factor; ++y) {
        for (int x = bx * factor; x < (bx + 1) * factor; ++x) {
          if (depth.is_valid(x, y)) vals.push_back(depth.values.at(x, y));
        }
      }
      if (2 * static_cast<int>(vals.size()) < block || vals.empty()) continue;
      // Median; even counts average the two middle values.
      const std::size_t m = vals.size() / 2;
      std::nth_element(vals.begin(), vals.begin() + m, vals.end());
      double med = vals[m];
      if (vals.size() % 2 == 0) {
        med = 0.5 * (med + *std::max_element(vals.begin(), vals.begin() + m));
      }
      out.set(bx, by, med);
    }
  }
  return out;
}

}  // namespace stereosynth
