#pragma once

#include <cstdint>
#include <vector>

#include "dak/geometry.hpp"
#include "dak/matching.hpp"

namespace dak {

// Time-ordered absolute camera-to-world poses.
struct Trajectory {
  std::vector<Pose> poses;

  int size() const { return static_cast<int>(poses.size()); }
  // Path length accumulated up to each pose (meters), from position deltas.
  std::vector<double> cumulative_path() const;
  // Throws DataError unless there are at least 2 poses.
  void validate() const;
};

// Closed-form similarity alignment minimizing sum ||gt_i - (s R est_i + t)||^2
// over the two position sequences. Requires equal lengths >= 3 and
// non-degenerate spread of the estimated positions.
Sim3 umeyama_sim3(const Trajectory& est, const Trajectory& gt);

// Applies a similarity to every pose: positions are mapped by the Sim3,
// orientations are rotated.
Trajectory apply_sim3(const Sim3& S, const Trajectory& traj);

// Rotation angle in radians, robust near zero (exactly 0 for a symmetric
// near-identity matrix).
double rotation_angle(const Eigen::Matrix3d& R);

struct DriftMetrics {
  double t_rel_percent = 0.0;       // translational drift, % of segment length
  double r_rel_deg_per_100m = 0.0;  // rotational drift
  int n_segments = 0;
};

// Relative-pose drift over segment lengths {100, 200, ..., 800} m of
// accumulated ground-truth path, starting at every frame. `est` should
// already be Sim(3)-aligned onto `gt`. Throws EstimationError when the
// trajectory is shorter than the smallest segment length.
DriftMetrics kitti_drift(const Trajectory& est, const Trajectory& gt);

struct KeypointMetricConfig {
  double distance_threshold_px = 3.0;
  int n_keypoints_homography = 300;
  int homography_ransac_iters = 5000;
  double homography_threshold_px = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Fraction of keypoints from `a`, warped into `b` by the true homography and
// landing inside b's image, whose nearest `b` keypoint lies within
// `threshold_px`. Returns NaN when no warped keypoint lands in view.
double repeatability(const KeypointFrame& a, const KeypointFrame& b, const Eigen::Matrix3d& H_gt,
                     double threshold_px);

// Mean distance between warped keypoints and their associated (nearest
// within threshold) keypoints in `b`. NaN when nothing associates.
double localization_error(const KeypointFrame& a, const KeypointFrame& b,
                          const Eigen::Matrix3d& H_gt, double threshold_px);

// Fraction of in-view keypoints whose reciprocal descriptor match lands
// within `threshold_px` of the true warp.
double matching_score(const KeypointFrame& a, const KeypointFrame& b, const Eigen::Matrix3d& H_gt,
                      double threshold_px);

// Robust homography from point correspondences: 4-point normalized DLT
// hypotheses, symmetric transfer error, final DLT refit on the consensus
// set. Deterministic for a fixed config. Throws EstimationError with fewer
// than 4 matches or when every sample is degenerate.
Eigen::Matrix3d estimate_homography_ransac(const Pixels& from, const Pixels& to,
                                           const KeypointMetricConfig& cfg);

// Corner-transfer accuracy: estimates a homography from reciprocal matches
// of the top-scoring keypoints, warps `corners` (2x4) by it and by the
// truth, and reports 1.0/0.0 per epsilon for mean corner distance < eps.
// Estimation failure or fewer than 4 matches count as inaccurate.
std::vector<double> homography_accuracy(const KeypointFrame& a, const KeypointFrame& b,
                                        const Eigen::Matrix3d& H_gt, const Pixels& corners,
                                        const std::vector<double>& eps_list,
                                        const KeypointMetricConfig& cfg);

}  // namespace dak
