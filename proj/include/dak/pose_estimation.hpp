#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "dak/geometry.hpp"
#include "dak/matching.hpp"

namespace dak {

struct RansacConfig {
  int max_iterations = 256;
  double inlier_threshold_px = 3.0;
  int min_sample = 4;
  double confidence = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PoseEstimate {
  Pose initial;               // robust PnP solution
  Pose refined;               // after the closed-form 3D-3D correction
  CorrespondenceSet inliers;  // matched pairs, inlier_mask filled in
  double residual_rms_px = 0.0;
};

// Gauss-Newton refinement of the reprojection error
//   sum_i || p_i - project(X * P_i) ||^2
// over left-multiplied twist increments, starting from `init`. Stops when
// the step norm drops below 1e-10 or after 100 iterations. Throws
// EstimationError on a rank-deficient normal matrix or when the residual
// keeps growing.
Pose pnp_gauss_newton(const PointCloud3& target_points, const Pixels& context_pixels,
                      const CameraIntrinsics& K, const Pose& init);

// Robust wrapper: minimal 4-point hypotheses solved by Gauss-Newton from
// identity, inliers counted under the reprojection threshold, adaptive
// iteration bound from the inlier ratio, final refit on the best consensus
// set. Deterministic for a fixed config. The returned correspondence set
// pairs input indices with themselves; `refined` equals `initial` until a
// 3D-3D correction is applied downstream.
PoseEstimate pnp_ransac(const PointCloud3& target_points, const Pixels& context_pixels,
                        const CameraIntrinsics& K, const RansacConfig& cfg);

// Lifts context pixels to 3D using depths transferred from the target cloud
// through an initial pose: each target point is moved into the context
// frame and its z becomes the context keypoint's depth. Points that land at
// or behind the camera are dropped; `kept` lists the surviving input
// indices.
struct LiftedClouds {
  PointCloud3 target;
  PointCloud3 context;
  std::vector<int> kept;
};
LiftedClouds lift_context(const Pixels& context_pixels, const PointCloud3& target_points,
                          const Pose& initial_pose, const CameraIntrinsics& K);

// Closed-form rigid alignment: the pose (R, t) minimizing
//   sum_i || context_i - (R * target_i + t) ||^2.
// Throws EstimationError when the point sets are degenerate (collinear or
// collapsed).
Pose procrustes(const PointCloud3& target_points, const PointCloud3& context_points);

// Gradients of procrustes() with respect to both clouds, for upstream
// losses on the returned rotation and translation. Near-equal singular
// values make the analytic rotation gradient ill-conditioned; in that case
// the result is computed by central differences and `fd_fallback` is set.
struct ProcrustesGrad {
  PointCloud3 d_target;
  PointCloud3 d_context;
  bool fd_fallback = false;
};
ProcrustesGrad procrustes_backward(const PointCloud3& target_points,
                                   const PointCloud3& context_points,
                                   const Eigen::Matrix3d& grad_rotation,
                                   const Eigen::Vector3d& grad_translation);

// Full two-frame relative pose: reciprocal matching (with an optional
// descriptor-distance cutoff), robust PnP on the matched pairs, then the
// closed-form correction on the lifted clouds. The target frame must carry
// depths.
PoseEstimate estimate_relative_pose(
    const KeypointFrame& target, const KeypointFrame& context, const CameraIntrinsics& K,
    const RansacConfig& cfg,
    double match_max_distance = std::numeric_limits<double>::infinity());

}  // namespace dak
