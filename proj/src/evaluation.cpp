#include "dak/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dak/errors.hpp"
#include "dak/random.hpp"
#include "dak/synth.hpp"

namespace dak {
namespace {

constexpr double kRadToDeg = 57.295779513082320876798154814105;

bool in_bounds(const Eigen::Vector2d& p, int width, int height) {
  return p.x() >= 0.0 && p.x() < width && p.y() >= 0.0 && p.y() < height;
}

void require_frame_size(const KeypointFrame& f, const char* who) {
  if (f.width <= 0 || f.height <= 0)
    throw DataError(std::string(who) + ": keypoint frame needs an attached image size");
}

// Keypoint indices ordered by descending score (ties to the lower index),
// truncated to k.
std::vector<int> top_k_by_score(const KeypointFrame& f, int k) {
  std::vector<int> order(static_cast<std::size_t>(f.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return f.scores(a) > f.scores(b); });
  if (static_cast<int>(order.size()) > k) order.resize(static_cast<std::size_t>(k));
  return order;
}

KeypointFrame select_keypoints(const KeypointFrame& f, const std::vector<int>& idx) {
  KeypointFrame out;
  const int n = static_cast<int>(idx.size());
  out.positions.resize(2, n);
  out.descriptors.resize(f.descriptors.rows(), n);
  out.scores.resize(n);
  if (f.has_depths()) out.depths.resize(n);
  out.width = f.width;
  out.height = f.height;
  for (int k = 0; k < n; ++k) {
    out.positions.col(k) = f.positions.col(idx[static_cast<std::size_t>(k)]);
    out.descriptors.col(k) = f.descriptors.col(idx[static_cast<std::size_t>(k)]);
    out.scores(k) = f.scores(idx[static_cast<std::size_t>(k)]);
    if (f.has_depths()) out.depths(k) = f.depths(idx[static_cast<std::size_t>(k)]);
  }
  return out;
}

// Hartley normalization: zero centroid, mean distance sqrt(2).
Eigen::Matrix3d normalizing_transform(const Pixels& pts) {
  const Eigen::Vector2d centroid = pts.rowwise().mean();
  double mean_dist = 0.0;
  for (Eigen::Index i = 0; i < pts.cols(); ++i)
    mean_dist += (pts.col(i) - centroid).norm();
  mean_dist /= static_cast<double>(pts.cols());
  if (mean_dist < 1e-12) throw EstimationError("homography: collapsed point set");
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
  T(0, 0) = s;
  T(1, 1) = s;
  T(0, 2) = -s * centroid.x();
  T(1, 2) = -s * centroid.y();
  return T;
}

// Direct linear transform on >= 4 correspondences, both sides normalized.
Eigen::Matrix3d dlt_homography(const Pixels& from, const Pixels& to) {
  const Eigen::Index n = from.cols();
  if (n < 4) throw EstimationError("homography: needs at least 4 correspondences");
  const Eigen::Matrix3d T1 = normalizing_transform(from);
  const Eigen::Matrix3d T2 = normalizing_transform(to);

  Eigen::MatrixXd A(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = T1(0, 0) * from(0, i) + T1(0, 2);
    const double y = T1(1, 1) * from(1, i) + T1(1, 2);
    const double u = T2(0, 0) * to(0, i) + T2(0, 2);
    const double v = T2(1, 1) * to(1, i) + T2(1, 2);
    A.row(2 * i) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
    A.row(2 * i + 1) << x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d H = T2.inverse() * Hn * T1;
  if (std::abs(H(2, 2)) > 1e-12)
    H /= H(2, 2);
  else
    H /= H.norm();
  return H;
}

bool triple_collinear(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                      const Eigen::Vector2d& c) {
  const Eigen::Vector2d ab = b - a;
  const Eigen::Vector2d ac = c - a;
  const double area2 = std::abs(ab.x() * ac.y() - ab.y() * ac.x());
  const double scale = std::max({ab.norm(), ac.norm(), 1.0});
  return area2 < 1e-9 * scale * scale;
}

bool sample_degenerate(const Pixels& pts) {
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j)
      for (int k = j + 1; k < 4; ++k)
        if (triple_collinear(pts.col(i), pts.col(j), pts.col(k))) return true;
  return false;
}

// Symmetric transfer error squared; +inf when either direction degenerates.
Eigen::VectorXd symmetric_transfer_sq(const Pixels& from, const Pixels& to,
                                      const Eigen::Matrix3d& H) {
  const Eigen::Matrix3d Hinv = H.inverse();
  const HomographyWarp fwd = apply_homography(from, H);
  const HomographyWarp bwd = apply_homography(to, Hinv);
  Eigen::VectorXd err(from.cols());
  for (Eigen::Index i = 0; i < from.cols(); ++i) {
    if (!fwd.valid[static_cast<std::size_t>(i)] || !bwd.valid[static_cast<std::size_t>(i)]) {
      err(i) = std::numeric_limits<double>::infinity();
      continue;
    }
    err(i) = (fwd.pixels.col(i) - to.col(i)).squaredNorm() +
             (bwd.pixels.col(i) - from.col(i)).squaredNorm();
  }
  return err;
}

}  // namespace

std::vector<double> Trajectory::cumulative_path() const {
  std::vector<double> path(poses.size(), 0.0);
  for (std::size_t i = 1; i < poses.size(); ++i) {
    path[i] =
        path[i - 1] + (poses[i].translation() - poses[i - 1].translation()).norm();
  }
  return path;
}

void Trajectory::validate() const {
  if (poses.size() < 2) throw DataError("Trajectory: needs at least 2 poses");
}

Sim3 umeyama_sim3(const Trajectory& est, const Trajectory& gt) {
  if (est.size() != gt.size()) throw DataError("umeyama_sim3: length mismatch");
  if (est.size() < 3) throw DataError("umeyama_sim3: needs at least 3 poses");
  const int n = est.size();

  Eigen::Matrix3Xd X(3, n), Y(3, n);
  for (int i = 0; i < n; ++i) {
    X.col(i) = est.poses[static_cast<std::size_t>(i)].translation();
    Y.col(i) = gt.poses[static_cast<std::size_t>(i)].translation();
  }
  const Eigen::Vector3d mu_x = X.rowwise().mean();
  const Eigen::Vector3d mu_y = Y.rowwise().mean();
  const Eigen::Matrix3Xd Xc = X.colwise() - mu_x;
  const Eigen::Matrix3Xd Yc = Y.colwise() - mu_y;

  const double var_x = Xc.squaredNorm() / n;
  if (var_x < 1e-18) throw EstimationError("umeyama_sim3: degenerate position spread");

  const Eigen::Matrix3d Sigma = Yc * Xc.transpose() / n;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(Sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d S = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;

  Sim3 out;
  const Eigen::Matrix3d R = svd.matrixU() * S * svd.matrixV().transpose();
  out.scale = (svd.singularValues().asDiagonal() * S).trace() / var_x;
  out.pose = Pose(R, mu_y - out.scale * (R * mu_x));
  return out;
}

Trajectory apply_sim3(const Sim3& S, const Trajectory& traj) {
  Trajectory out;
  out.poses.reserve(traj.poses.size());
  for (const Pose& p : traj.poses)
    out.poses.emplace_back(S.pose.rotation() * p.rotation(), S * p.translation());
  return out;
}

double rotation_angle(const Eigen::Matrix3d& R) {
  const double c = 0.5 * (R.trace() - 1.0);
  const Eigen::Vector3d axis_raw(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  // atan2 form of the clamped-arccos extraction: identical in exact
  // arithmetic, and exactly 0 when R is symmetric with positive trace.
  return std::atan2(0.5 * axis_raw.norm(), std::clamp(c, -1.0, 1.0));
}

DriftMetrics kitti_drift(const Trajectory& est, const Trajectory& gt) {
  est.validate();
  gt.validate();
  if (est.size() != gt.size()) throw DataError("kitti_drift: trajectory length mismatch");
  const int n = gt.size();
  const std::vector<double> path = gt.cumulative_path();

  static constexpr double kLengths[] = {100.0, 200.0, 300.0, 400.0,
                                        500.0, 600.0, 700.0, 800.0};
  if (path.back() < kLengths[0])
    throw EstimationError("kitti_drift: trajectory shorter than the smallest segment length");

  double t_sum = 0.0;
  double r_sum = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    for (double L : kLengths) {
      const double target = path[static_cast<std::size_t>(i)] + L;
      const auto it = std::lower_bound(path.begin() + i, path.end(), target);
      if (it == path.end()) break;  // longer lengths will not fit either
      const int j = static_cast<int>(it - path.begin());

      const Pose rel_gt = gt.poses[static_cast<std::size_t>(i)].inverse() *
                          gt.poses[static_cast<std::size_t>(j)];
      const Pose rel_est = est.poses[static_cast<std::size_t>(i)].inverse() *
                           est.poses[static_cast<std::size_t>(j)];
      const Pose E = rel_gt.inverse() * rel_est;
      t_sum += E.translation().norm() / L * 100.0;
      // Geodesic angle between the relative rotations via the chordal
      // distance, ||A - B||_F = 2*sqrt(2)*sin(theta/2). Unlike extracting
      // the angle of E's rotation, this is exactly 0 when est == gt bitwise
      // (the matrix product A^T A need not come out bitwise symmetric).
      const double chord = (rel_est.rotation() - rel_gt.rotation()).norm();
      const double angle = 2.0 * std::asin(std::min(1.0, chord / (2.0 * std::sqrt(2.0))));
      r_sum += angle * kRadToDeg / L * 100.0;
      ++count;
    }
  }
  DriftMetrics out;
  out.n_segments = count;
  if (count > 0) {
    out.t_rel_percent = t_sum / count;
    out.r_rel_deg_per_100m = r_sum / count;
  }
  return out;
}

void KeypointMetricConfig::validate() const {
  if (!(distance_threshold_px > 0.0) || n_keypoints_homography <= 0 ||
      homography_ransac_iters <= 0 || !(homography_threshold_px > 0.0))
    throw DataError("KeypointMetricConfig: all parameters must be positive");
}

double repeatability(const KeypointFrame& a, const KeypointFrame& b, const Eigen::Matrix3d& H_gt,
                     double threshold_px) {
  require_frame_size(b, "repeatability");
  const HomographyWarp warp = apply_homography(a.positions, H_gt);
  int shared = 0;
  int correct = 0;
  for (int i = 0; i < a.size(); ++i) {
    if (!warp.valid[static_cast<std::size_t>(i)]) continue;
    const Eigen::Vector2d w = warp.pixels.col(i);
    if (!in_bounds(w, b.width, b.height)) continue;
    ++shared;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < b.size(); ++j)
      best = std::min(best, (b.positions.col(j) - w).norm());
    if (best <= threshold_px) ++correct;
  }
  if (shared == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(correct) / static_cast<double>(shared);
}

double localization_error(const KeypointFrame& a, const KeypointFrame& b,
                          const Eigen::Matrix3d& H_gt, double threshold_px) {
  require_frame_size(b, "localization_error");
  const HomographyWarp warp = apply_homography(a.positions, H_gt);
  double sum = 0.0;
  int associated = 0;
  for (int i = 0; i < a.size(); ++i) {
    if (!warp.valid[static_cast<std::size_t>(i)]) continue;
    const Eigen::Vector2d w = warp.pixels.col(i);
    if (!in_bounds(w, b.width, b.height)) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < b.size(); ++j)
      best = std::min(best, (b.positions.col(j) - w).norm());
    if (best <= threshold_px) {
      sum += best;
      ++associated;
    }
  }
  if (associated == 0) return std::numeric_limits<double>::quiet_NaN();
  return sum / static_cast<double>(associated);
}

double matching_score(const KeypointFrame& a, const KeypointFrame& b, const Eigen::Matrix3d& H_gt,
                      double threshold_px) {
  require_frame_size(b, "matching_score");
  const HomographyWarp warp = apply_homography(a.positions, H_gt);
  int shared = 0;
  for (int i = 0; i < a.size(); ++i) {
    if (!warp.valid[static_cast<std::size_t>(i)]) continue;
    if (in_bounds(warp.pixels.col(i), b.width, b.height)) ++shared;
  }
  if (shared == 0) return std::numeric_limits<double>::quiet_NaN();

  const CorrespondenceSet matches = reciprocal_match(a, b);
  int correct = 0;
  for (const auto& [i, j] : matches.pairs) {
    if (!warp.valid[static_cast<std::size_t>(i)]) continue;
    const Eigen::Vector2d w = warp.pixels.col(i);
    if (!in_bounds(w, b.width, b.height)) continue;
    if ((b.positions.col(j) - w).norm() <= threshold_px) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(shared);
}

Eigen::Matrix3d estimate_homography_ransac(const Pixels& from, const Pixels& to,
                                           const KeypointMetricConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = from.cols();
  if (to.cols() != n) throw DataError("estimate_homography_ransac: size mismatch");
  if (n < 4) throw EstimationError("estimate_homography_ransac: needs at least 4 matches");

  Rng rng(cfg.seed);
  const double thresh_sq = cfg.homography_threshold_px * cfg.homography_threshold_px;
  constexpr double kConfidence = 0.999;

  int best_count = 0;
  Eigen::Matrix3d best_H = Eigen::Matrix3d::Identity();
  double required_iterations = static_cast<double>(cfg.homography_ransac_iters);

  Pixels sample_from(2, 4), sample_to(2, 4);
  std::array<int, 4> sample{};
  for (int iter = 0; iter < cfg.homography_ransac_iters; ++iter) {
    if (static_cast<double>(iter) >= required_iterations && best_count >= 4) break;

    for (int k = 0; k < 4; ++k) {
      int idx;
      bool fresh;
      do {
        idx = rng.uniform_int(static_cast<int>(n));
        fresh = std::find(sample.begin(), sample.begin() + k, idx) == sample.begin() + k;
      } while (!fresh);
      sample[static_cast<std::size_t>(k)] = idx;
      sample_from.col(k) = from.col(idx);
      sample_to.col(k) = to.col(idx);
    }
    if (sample_degenerate(sample_from) || sample_degenerate(sample_to)) continue;

    Eigen::Matrix3d H;
    try {
      H = dlt_homography(sample_from, sample_to);
    } catch (const EstimationError&) {
      continue;
    }
    const Eigen::VectorXd err = symmetric_transfer_sq(from, to, H);
    const int count = static_cast<int>((err.array() < thresh_sq).count());
    if (count > best_count) {
      best_count = count;
      best_H = H;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double denom = std::log1p(-std::pow(w, 4));
      required_iterations =
          denom < 0.0 ? std::ceil(std::log(1.0 - kConfidence) / denom) : 0.0;
    }
  }
  if (best_count < 4) throw EstimationError("estimate_homography_ransac: no consensus reached");

  // Refit on the consensus set.
  const Eigen::VectorXd err = symmetric_transfer_sq(from, to, best_H);
  Pixels in_from(2, best_count), in_to(2, best_count);
  int k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(err(i) < thresh_sq)) continue;
    in_from.col(k) = from.col(i);
    in_to.col(k) = to.col(i);
    ++k;
  }
  try {
    return dlt_homography(in_from, in_to);
  } catch (const EstimationError&) {
    return best_H;
  }
}

std::vector<double> homography_accuracy(const KeypointFrame& a, const KeypointFrame& b,
                                        const Eigen::Matrix3d& H_gt, const Pixels& corners,
                                        const std::vector<double>& eps_list,
                                        const KeypointMetricConfig& cfg) {
  cfg.validate();
  std::vector<double> out(eps_list.size(), 0.0);

  const KeypointFrame a_top = select_keypoints(a, top_k_by_score(a, cfg.n_keypoints_homography));
  const KeypointFrame b_top = select_keypoints(b, top_k_by_score(b, cfg.n_keypoints_homography));
  const CorrespondenceSet matches = reciprocal_match(a_top, b_top);
  if (matches.size() < 4) return out;

  Pixels from(2, matches.size()), to(2, matches.size());
  for (int k = 0; k < matches.size(); ++k) {
    from.col(k) = a_top.positions.col(matches.pairs[static_cast<std::size_t>(k)].first);
    to.col(k) = b_top.positions.col(matches.pairs[static_cast<std::size_t>(k)].second);
  }
  Eigen::Matrix3d H_est;
  try {
    H_est = estimate_homography_ransac(from, to, cfg);
  } catch (const EstimationError&) {
    return out;
  }

  const HomographyWarp warp_est = apply_homography(corners, H_est);
  const HomographyWarp warp_gt = apply_homography(corners, H_gt);
  double mean_dist = 0.0;
  for (Eigen::Index i = 0; i < corners.cols(); ++i) {
    if (!warp_est.valid[static_cast<std::size_t>(i)] || !warp_gt.valid[static_cast<std::size_t>(i)])
      return out;  // corner thrown to infinity: inaccurate at every eps
    mean_dist += (warp_est.pixels.col(i) - warp_gt.pixels.col(i)).norm();
  }
  mean_dist /= static_cast<double>(corners.cols());
  for (std::size_t e = 0; e < eps_list.size(); ++e) out[e] = mean_dist < eps_list[e] ? 1.0 : 0.0;
  return out;
}

}  // namespace dak
