#include "dak/matching.hpp"

#include <cmath>

#include "dak/errors.hpp"

namespace dak {

void KeypointFrame::validate() const {
  const Eigen::Index n = positions.cols();
  if (descriptors.cols() != n) throw DataError("KeypointFrame: descriptor count mismatch");
  if (scores.size() != n) throw DataError("KeypointFrame: score count mismatch");
  if (!positions.allFinite() || !descriptors.allFinite() || !scores.allFinite())
    throw DataError("KeypointFrame: non-finite values");
  if (n > 0 && (scores.minCoeff() < 0.0 || scores.maxCoeff() > 1.0))
    throw DataError("KeypointFrame: scores outside [0, 1]");
  if (width > 0 && height > 0 && n > 0) {
    if (positions.row(0).minCoeff() < 0.0 || positions.row(0).maxCoeff() >= width ||
        positions.row(1).minCoeff() < 0.0 || positions.row(1).maxCoeff() >= height)
      throw DataError("KeypointFrame: positions outside image bounds");
  }
  if (has_depths()) {
    if (depths.size() != n) throw DataError("KeypointFrame: depth count mismatch");
    if (!depths.allFinite() || (n > 0 && depths.minCoeff() <= 0.0))
      throw DataError("KeypointFrame: depths must be positive");
  }
}

int CorrespondenceSet::inlier_count() const {
  int n = 0;
  for (std::uint8_t f : inlier_mask) n += (f != 0);
  return n;
}

CorrespondenceSet reciprocal_match(const KeypointFrame& target, const KeypointFrame& context,
                                   double max_distance) {
  const Eigen::Index n = target.descriptors.cols();
  const Eigen::Index m = context.descriptors.cols();
  CorrespondenceSet out;
  if (n == 0 || m == 0) return out;
  if (target.descriptors.rows() != context.descriptors.rows())
    throw DataError("reciprocal_match: descriptor dimension mismatch");

  // Plain exhaustive pass; squared distances, evaluated one pair at a
  // time so the argmin is reproducible regardless of blocking.
  std::vector<int> best_in_context(static_cast<std::size_t>(n));
  std::vector<double> best_d2(static_cast<std::size_t>(n));
  std::vector<int> best_in_target(static_cast<std::size_t>(m), -1);
  std::vector<double> best_d2_ctx(static_cast<std::size_t>(m),
                                  std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) {
    int arg = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d2 = (target.descriptors.col(i) - context.descriptors.col(j)).squaredNorm();
      if (d2 < best) {
        best = d2;
        arg = static_cast<int>(j);
      }
      if (d2 < best_d2_ctx[static_cast<std::size_t>(j)]) {
        best_d2_ctx[static_cast<std::size_t>(j)] = d2;
        best_in_target[static_cast<std::size_t>(j)] = static_cast<int>(i);
      }
    }
    best_in_context[static_cast<std::size_t>(i)] = arg;
    best_d2[static_cast<std::size_t>(i)] = best;
  }

  const double max_d2 = max_distance * max_distance;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int j = best_in_context[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    if (best_in_target[static_cast<std::size_t>(j)] != static_cast<int>(i)) continue;
    if (best_d2[static_cast<std::size_t>(i)] > max_d2) continue;
    out.pairs.emplace_back(static_cast<int>(i), j);
  }
  return out;
}

std::optional<int> hardest_negative(const KeypointFrame& anchors, int anchor_index,
                                    const KeypointFrame& candidates, int positive_index,
                                    double safe_radius_px) {
  if (anchor_index < 0 || anchor_index >= anchors.size())
    throw DataError("hardest_negative: anchor index out of range");
  if (positive_index < 0 || positive_index >= candidates.size())
    throw DataError("hardest_negative: positive index out of range");
  if (anchors.descriptors.rows() != candidates.descriptors.rows())
    throw DataError("hardest_negative: descriptor dimension mismatch");

  const Eigen::Vector2d positive_pos = candidates.positions.col(positive_index);
  const double r2 = safe_radius_px * safe_radius_px;
  int arg = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < candidates.size(); ++j) {
    if (j == positive_index) continue;
    if ((candidates.positions.col(j) - positive_pos).squaredNorm() <= r2) continue;
    const double d2 =
        (anchors.descriptors.col(anchor_index) - candidates.descriptors.col(j)).squaredNorm();
    if (d2 < best) {
      best = d2;
      arg = j;
    }
  }
  if (arg < 0) return std::nullopt;
  return arg;
}

}  // namespace dak
