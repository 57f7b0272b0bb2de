#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dak/evaluation.hpp"
#include "dak/geometry.hpp"
#include "dak/image.hpp"
#include "dak/matching.hpp"

namespace dak {

enum class MotionModel { kRandomWalk, kForwardDrive, kOrbit };

MotionModel motion_model_from_string(const std::string& name);
std::string to_string(MotionModel model);

struct SceneConfig {
  int n_points = 600;
  double depth_min = 4.0;
  double depth_max = 40.0;
  int image_width = 640;
  int image_height = 480;
  CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5};
  double pixel_noise_sigma = 0.0;
  double outlier_rate = 0.0;
  int descriptor_dim = 32;
  double descriptor_noise_sigma = 0.0;
  double depth_noise_sigma = 0.0;  // multiplicative, on keypoint depths
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticFrame {
  KeypointFrame keypoints;
  std::vector<int> landmark_ids;           // per keypoint
  std::vector<std::uint8_t> outlier_labels;  // per keypoint
  DepthMap depth;                          // dense, planar scenes only (else 0x0)
  Image image;                             // rendered, planar scenes only (else empty)
};

// Plane n . X = offset in world coordinates.
struct PlaneModel {
  Eigen::Vector3d normal = Eigen::Vector3d(0.0, 0.0, 1.0);
  double offset = 1.0;
};

struct SyntheticSequence {
  PointCloud3 landmarks;             // world frame
  Eigen::MatrixXd true_descriptors;  // D x n_landmarks, unit columns
  Trajectory trajectory_gt;          // camera-to-world
  std::vector<SyntheticFrame> frames;
  std::optional<PlaneModel> plane;  // set by the planar generator
};

// Random 3D scene with exact ground truth: landmarks seeded inside the view
// frusta along the trajectory, per-frame keypoints are projected visible
// landmarks with the configured noise and labeled outliers. Deterministic
// per seed (the draw order is part of the output contract).
SyntheticSequence generate_point_scene(const SceneConfig& cfg, int n_frames, MotionModel motion);

// Textured plane observed by a gently moving camera: images rendered from an
// analytic plane-induced warp of a smooth band-limited texture, dense depth
// analytic per pixel, keypoints sampled on the plane.
SyntheticSequence generate_planar_scene(const SceneConfig& cfg, int n_frames,
                                        std::uint64_t texture_seed);

// Smooth procedural texture: a normalized sum of 8 sinusoids. Frequencies
// are capped well below what bilinear interpolation resolves at the plane's
// pixel footprint, keeping interpolation error under 1e-3.
struct PlanarTexture {
  struct Wave {
    double amplitude = 0.0;
    double kx = 0.0;  // spatial angular frequency, plane units
    double ky = 0.0;
    double phase = 0.0;
  };
  std::vector<Wave> waves;
  double amplitude_sum = 1.0;

  double eval(double px, double py) const;
};

PlanarTexture make_plane_texture(std::uint64_t seed, double max_cycles_per_px,
                                 const CameraIntrinsics& K, double plane_depth);

Image render_plane_image(const PlanarTexture& texture, const PlaneModel& plane,
                         const Pose& cam_to_world, const CameraIntrinsics& K, int width,
                         int height);
DepthMap render_plane_depth(const PlaneModel& plane, const Pose& cam_to_world,
                            const CameraIntrinsics& K, int width, int height);

// Plane-induced homography mapping pixels of camera a to pixels of camera b.
Eigen::Matrix3d plane_homography(const PlaneModel& plane, const Pose& cam_a_to_world,
                                 const Pose& cam_b_to_world, const CameraIntrinsics& K);

// Projective warp of pixel coordinates; points mapped to w ~ 0 are flagged
// invalid and zeroed.
struct HomographyWarp {
  Pixels pixels;
  std::vector<std::uint8_t> valid;
};
HomographyWarp apply_homography(const Pixels& pixels, const Eigen::Matrix3d& H);

}  // namespace dak
