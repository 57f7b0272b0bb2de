#pragma once

#include <vector>

#include "dak/geometry.hpp"
#include "dak/image.hpp"

namespace dak {

// Weights combining the self-supervision objectives; see total_loss.
struct LossWeights {
  double alpha = 0.1;   // keypoint block
  double beta1 = 1.0;   // descriptor term
  double beta2 = 1.0;   // score term
  double beta3 = 0.1;   // smoothness term
  double beta4 = 0.1;   // depth-consistency term
  double gamma = 0.85;  // SSIM share of the photometric term
  double margin = 0.2;  // triplet margin

  void validate() const;
};

// ---- keypoint warping ------------------------------------------------------

// Moves target keypoints into the context view: project(pose * points).
// Points that land at or behind the camera are flagged invalid.
Projection warp_keypoints(const PointCloud3& target_points, const Pose& pose,
                          const CameraIntrinsics& K);

struct WarpGrad {
  PointCloud3 d_points;
  Eigen::Matrix3d d_rotation;
  Eigen::Vector3d d_translation;
};
WarpGrad warp_keypoints_backward(const PointCloud3& target_points, const Pose& pose,
                                 const CameraIntrinsics& K, const Pixels& grad_pixels);

// ---- sparse keypoint losses ------------------------------------------------

// Mean Euclidean distance between warped and context keypoints.
struct GeometricLoss {
  double value = 0.0;
  Pixels d_warped;
  Pixels d_context;
};
GeometricLoss geometric_loss(const Pixels& warped, const Pixels& context);

// Mean hinge over triplet columns: max(0, ||a - p|| - ||a - n|| + margin).
struct TripletLoss {
  double value = 0.0;
  Eigen::MatrixXd d_anchor;
  Eigen::MatrixXd d_positive;
  Eigen::MatrixXd d_negative;
};
TripletLoss descriptor_triplet_loss(const Eigen::MatrixXd& anchor, const Eigen::MatrixXd& positive,
                                    const Eigen::MatrixXd& negative, double margin);

// Pulls keypoint scores toward usefulness: mean over pairs of
//   (s_t + s_c)/2 * (e - mean(e)) + (s_t - s_c)^2
// where e is the warped-to-context pixel distance.
struct ScoreLoss {
  double value = 0.0;
  Eigen::VectorXd d_target_scores;
  Eigen::VectorXd d_context_scores;
  Pixels d_warped;
  Pixels d_context;
};
ScoreLoss score_loss(const Eigen::VectorXd& target_scores, const Eigen::VectorXd& context_scores,
                     const Pixels& warped, const Pixels& context);

// ---- dense photometric path -------------------------------------------------

// 4-neighbor bilinear interpolation at continuous pixel coords. Samples
// outside [0, W-1] x [0, H-1] are flagged invalid and return 0.
struct BilinearImageResult {
  Eigen::MatrixXd values;  // M x C
  std::vector<std::uint8_t> valid;
};
BilinearImageResult bilinear_sample(const Image& img, const Pixels& coords);
// Gradient w.r.t. the sample coordinates; invalid samples get zero.
Pixels bilinear_sample_backward(const Image& img, const Pixels& coords,
                                const Eigen::MatrixXd& grad_values);

struct BilinearDepthResult {
  Eigen::VectorXd values;
  std::vector<std::uint8_t> valid;
};
BilinearDepthResult bilinear_sample(const DepthMap& depth, const Pixels& coords);
Pixels bilinear_sample_backward(const DepthMap& depth, const Pixels& coords,
                                const Eigen::VectorXd& grad_values);

// Reconstructs the target view from the context image: every target pixel is
// unprojected with the target depth, moved by `pose`, and sampled from
// `context`. Pixels that leave the context image (or have non-positive
// depth) are invalid.
struct SynthesizedView {
  Image image;
  std::vector<std::uint8_t> valid;  // H*W row-major
};
SynthesizedView synthesize_view(const Image& context, const DepthMap& target_depth,
                                const Pose& pose, const CameraIntrinsics& K);

// Per-pixel structural similarity with 3x3 box-filtered statistics and
// replicate padding, averaged over channels. Values lie in [-1, 1].
Eigen::ArrayXXd ssim(const Image& x, const Image& y);

// gamma * (1 - SSIM)/2 + (1 - gamma) * |I_t - synth|, mean-reduced over the
// valid mask (all pixels when the mask is null).
struct PhotometricLoss {
  double value = 0.0;
  Eigen::ArrayXXd map;  // per-pixel loss, H x W
};
PhotometricLoss photometric_loss(const Image& target, const Image& synthesized, double gamma,
                                 const std::vector<std::uint8_t>* valid = nullptr);
// Gradient of the reduced value w.r.t. the synthesized image.
Image photometric_loss_backward(const Image& target, const Image& synthesized, double gamma,
                                const std::vector<std::uint8_t>* valid = nullptr);

// Static-pixel rejection: keep a pixel iff the synthesized view explains it
// strictly better than the raw context frame does.
std::vector<std::uint8_t> auto_mask(const Image& target, const Image& synthesized,
                                    const Image& context, double gamma);

// Edge-aware first-order smoothness of mean-normalized inverse depth:
// forward differences weighted by exp(-|image gradient|), averaged per axis.
struct SmoothnessLoss {
  double value = 0.0;
  DepthMap d_depth;  // gradient w.r.t. every depth value
};
SmoothnessLoss smoothness_loss(const DepthMap& depth, const Image& image);

// Scale-free consistency between sparse target depths and the dense context
// depth sampled at matched pixels: mean |a - b| / (a + b). Pairs whose
// context sample is invalid are skipped (`used` records which survived).
struct DepthConsistencyLoss {
  double value = 0.0;
  Eigen::VectorXd d_target_depths;
  Pixels d_context_pixels;
  std::vector<std::uint8_t> used;
};
DepthConsistencyLoss depth_consistency_loss(const Eigen::VectorXd& target_depths,
                                            const DepthMap& context_depth,
                                            const Pixels& context_pixels);

// ---- combination -------------------------------------------------------------

struct LossTerms {
  double geometric = 0.0;
  double descriptor = 0.0;
  double score = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
  double depth_consistency = 0.0;
};

// total = depth block + alpha * keypoint block, with
//   keypoint block = geometric + beta1 * descriptor + beta2 * score
//   depth block    = photometric + beta3 * smoothness + beta4 * depth_consistency.
// `d_terms` holds d(total)/d(sub-loss), i.e. the effective weight of each
// term, for chaining upstream gradients.
struct TotalLoss {
  double total = 0.0;
  double keypoint_total = 0.0;
  double depth_total = 0.0;
  LossTerms terms;
  LossTerms d_terms;
};
TotalLoss total_loss(const LossTerms& terms, const LossWeights& w);

}  // namespace dak
