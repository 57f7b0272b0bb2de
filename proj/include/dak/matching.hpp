#pragma once

#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dak/geometry.hpp"

namespace dak {

// Keypoints detected in one image: pixel positions, descriptors, confidence
// scores and (optionally) per-keypoint depths.
struct KeypointFrame {
  Pixels positions;             // 2xN
  Eigen::MatrixXd descriptors;  // DxN, one column per keypoint
  Eigen::VectorXd scores;       // N, each in [0, 1]
  Eigen::VectorXd depths;       // N positive values, or empty when unavailable
  int width = 0;                // source image size; 0 means unknown
  int height = 0;

  int size() const { return static_cast<int>(positions.cols()); }
  bool has_depths() const { return depths.size() > 0; }

  // Throws DataError when any field violates its contract.
  void validate() const;
};

// Index pairs (target_index, context_index) linking two frames.
struct CorrespondenceSet {
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::uint8_t> inlier_mask;  // empty, or one flag per pair

  int size() const { return static_cast<int>(pairs.size()); }
  int inlier_count() const;
};

// Mutual nearest-neighbor matching in descriptor space: (i, j) survives iff
// j is i's nearest context descriptor and i is j's nearest target
// descriptor. Euclidean distance; ties go to the lowest index. Pairs with
// descriptor distance above `max_distance` are discarded.
CorrespondenceSet reciprocal_match(
    const KeypointFrame& target, const KeypointFrame& context,
    double max_distance = std::numeric_limits<double>::infinity());

// Hardest negative for a triplet: the candidate descriptor closest to the
// anchor, excluding the positive itself and every candidate within
// `safe_radius_px` of the positive's pixel position. Returns nullopt when
// the exclusions empty the pool.
std::optional<int> hardest_negative(const KeypointFrame& anchors, int anchor_index,
                                    const KeypointFrame& candidates, int positive_index,
                                    double safe_radius_px = 4.0);

}  // namespace dak
