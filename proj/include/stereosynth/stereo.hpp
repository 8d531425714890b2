#pragma once

#include "stereosynth/image.hpp"
#include "stereosynth/pointcloud.hpp"
#include "stereosynth/render.hpp"

namespace stereosynth {

struct MatchParams {
  int window_radius = 5;        // SAD window is (2r+1)^2
  int max_disparity = 128;      // disparities searched: [0, max_disparity]
  double uniqueness_ratio = 1.15;
  int lr_consistency_tol = 1;   // pixels
  double texture_threshold = 1e-4;  // minimum intensity variance in the window

  void validate() const;
};

/// SAD block matching on a rectified pair (left is the reference view).
///
/// Images are quantized to 8 bits before matching, as a sensor would
/// deliver them. A left pixel keeps its best integer disparity only if the
/// window is textured, the best cost is unique against every disparity more
/// than one step away, and matching from the right image lands back within
/// `lr_consistency_tol`. Survivors get 3-point parabolic refinement.
/// Pixels within `window_radius` of the border are invalid.
DisparityMap block_match(const GrayImage& left, const GrayImage& right, const MatchParams& params,
                         int workers = 1);

/// z = f·b/d for valid pixels with d > min_disparity; others invalid.
DepthMap disparity_to_depth(const DisparityMap& disparity, double focal_px, double baseline_m,
                            double min_disparity = 0.5);

/// Valid pixels lifted to 3D and mapped into the world by `pose`.
PointCloud backproject(const DepthMap& depth, const CameraIntrinsics& intrinsics,
                       const RigidPose& pose);

/// Median of the valid depths in each factor×factor block; a block with
/// fewer than half its pixels valid becomes invalid.
DepthMap downsample_depth(const DepthMap& depth, int factor);

}  // namespace stereosynth
