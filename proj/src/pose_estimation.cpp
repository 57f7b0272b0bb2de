#include "dak/pose_estimation.hpp"

#include <algorithm>
#include <cmath>

#include "dak/errors.hpp"
#include "dak/random.hpp"

namespace dak {
namespace {

constexpr int kGnMaxIterations = 100;
constexpr double kGnStepTolerance = 1e-10;
constexpr double kGnDamping = 1e-6;
constexpr int kGnMaxDivergingSteps = 5;

// Reprojection errors of `pose` against observed pixels; points behind the
// camera get +inf.
Eigen::VectorXd reprojection_errors(const Pose& pose, const PointCloud3& target_points,
                                    const Pixels& context_pixels, const CameraIntrinsics& K) {
  const Projection proj = project(transform(pose, target_points), K);
  Eigen::VectorXd err(target_points.cols());
  for (Eigen::Index i = 0; i < target_points.cols(); ++i) {
    err(i) = proj.valid[static_cast<std::size_t>(i)]
                 ? (proj.pixels.col(i) - context_pixels.col(i)).norm()
                 : std::numeric_limits<double>::infinity();
  }
  return err;
}

std::vector<std::uint8_t> inliers_under(const Eigen::VectorXd& errors, double threshold) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(errors.size()), 0);
  for (Eigen::Index i = 0; i < errors.size(); ++i)
    mask[static_cast<std::size_t>(i)] = errors(i) < threshold ? 1 : 0;
  return mask;
}

double rms_over_inliers(const Eigen::VectorXd& errors, const std::vector<std::uint8_t>& mask) {
  double sum = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < errors.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    sum += errors(i) * errors(i);
    ++n;
  }
  return n > 0 ? std::sqrt(sum / n) : 0.0;
}

}  // namespace

void RansacConfig::validate() const {
  if (max_iterations < 1) throw DataError("RansacConfig: max_iterations must be >= 1");
  if (!(inlier_threshold_px > 0.0)) throw DataError("RansacConfig: threshold must be positive");
  if (min_sample < 4) throw DataError("RansacConfig: min_sample must be >= 4");
  if (!(confidence > 0.0 && confidence < 1.0))
    throw DataError("RansacConfig: confidence must lie in (0, 1)");
}

Pose pnp_gauss_newton(const PointCloud3& target_points, const Pixels& context_pixels,
                      const CameraIntrinsics& K, const Pose& init) {
  const Eigen::Index n = target_points.cols();
  if (n != context_pixels.cols()) throw DataError("pnp_gauss_newton: point/pixel count mismatch");
  if (n < 4) throw DataError("pnp_gauss_newton: needs at least 4 correspondences");

  Pose X = init;
  double prev_residual = std::numeric_limits<double>::infinity();
  int diverging_steps = 0;

  for (int iter = 0; iter < kGnMaxIterations; ++iter) {
    Eigen::Matrix<double, 6, 6> JtJ = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> Jtr = Eigen::Matrix<double, 6, 1>::Zero();
    double residual_sq = 0.0;

    const PointCloud3 Pc = transform(X, target_points);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = Pc(2, i);
      if (z <= 0.0) continue;  // behind the camera: excluded this iteration
      const double x = Pc(0, i);
      const double y = Pc(1, i);
      const Eigen::Vector2d proj(K.fx * x / z + K.cx, K.fy * y / z + K.cy);
      const Eigen::Vector2d r = context_pixels.col(i) - proj;
      residual_sq += r.squaredNorm();

      Eigen::Matrix<double, 2, 3> d_proj;  // d(pixel)/d(camera point)
      d_proj << K.fx / z, 0.0, -K.fx * x / (z * z), 0.0, K.fy / z, -K.fy * y / (z * z);
      Eigen::Matrix<double, 3, 6> d_point;  // d(camera point)/d(twist [omega; v])
      d_point.leftCols<3>() = -skew(Pc.col(i));
      d_point.rightCols<3>() = Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 2, 6> J = d_proj * d_point;

      JtJ.noalias() += J.transpose() * J;
      Jtr.noalias() += J.transpose() * r;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(JtJ);
    const double eig_max = eig.eigenvalues().maxCoeff();
    if (!(eig_max > 0.0) || eig.eigenvalues().minCoeff() < 1e-12 * eig_max)
      throw EstimationError("pnp_gauss_newton: rank-deficient normal equations");

    const double residual = std::sqrt(residual_sq);
    if (residual > prev_residual) {
      if (++diverging_steps >= kGnMaxDivergingSteps)
        throw EstimationError("pnp_gauss_newton: residual diverged");
    } else {
      diverging_steps = 0;
    }
    prev_residual = residual;

    const Eigen::Matrix<double, 6, 6> damped =
        JtJ + kGnDamping * Eigen::Matrix<double, 6, 6>::Identity();
    const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(Jtr);
    X = se3_exp(Twist(delta)) * X;
    if (delta.norm() < kGnStepTolerance) break;
  }
  return X;
}

PoseEstimate pnp_ransac(const PointCloud3& target_points, const Pixels& context_pixels,
                        const CameraIntrinsics& K, const RansacConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = target_points.cols();
  if (n != context_pixels.cols()) throw DataError("pnp_ransac: point/pixel count mismatch");
  if (n < cfg.min_sample) throw EstimationError("pnp_ransac: not enough correspondences");

  Rng rng(cfg.seed);
  int best_count = 0;
  Pose best_pose;
  double required_iterations = static_cast<double>(cfg.max_iterations);

  std::vector<int> sample(static_cast<std::size_t>(cfg.min_sample));
  PointCloud3 sample_points(3, cfg.min_sample);
  Pixels sample_pixels(2, cfg.min_sample);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (static_cast<double>(iter) >= required_iterations && best_count >= cfg.min_sample) break;

    // Draw min_sample distinct indices.
    for (int k = 0; k < cfg.min_sample; ++k) {
      int idx;
      bool fresh;
      do {
        idx = rng.uniform_int(static_cast<int>(n));
        fresh = std::find(sample.begin(), sample.begin() + k, idx) == sample.begin() + k;
      } while (!fresh);
      sample[static_cast<std::size_t>(k)] = idx;
      sample_points.col(k) = target_points.col(idx);
      sample_pixels.col(k) = context_pixels.col(idx);
    }

    Pose hypothesis;
    try {
      hypothesis = pnp_gauss_newton(sample_points, sample_pixels, K, Pose::identity());
    } catch (const EstimationError&) {
      continue;  // degenerate or diverging sample, the iteration still counts
    }

    const Eigen::VectorXd errors = reprojection_errors(hypothesis, target_points, context_pixels, K);
    const int count = static_cast<int>((errors.array() < cfg.inlier_threshold_px).count());
    if (count > best_count) {
      best_count = count;
      best_pose = hypothesis;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double denom = std::log1p(-std::pow(w, 4));
      required_iterations = denom < 0.0 ? std::ceil(std::log(1.0 - cfg.confidence) / denom)
                                        : 0.0;  // all inliers: stop immediately
    }
  }

  if (best_count < cfg.min_sample) throw EstimationError("pnp_ransac: no consensus reached");

  // Refit on the consensus set of the best hypothesis.
  Eigen::VectorXd errors = reprojection_errors(best_pose, target_points, context_pixels, K);
  std::vector<std::uint8_t> mask = inliers_under(errors, cfg.inlier_threshold_px);
  PointCloud3 in_points(3, best_count);
  Pixels in_pixels(2, best_count);
  int k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    in_points.col(k) = target_points.col(i);
    in_pixels.col(k) = context_pixels.col(i);
    ++k;
  }
  Pose refit = best_pose;
  try {
    refit = pnp_gauss_newton(in_points, in_pixels, K, best_pose);
  } catch (const EstimationError&) {
    // keep the hypothesis if the refit degenerates
  }

  errors = reprojection_errors(refit, target_points, context_pixels, K);
  mask = inliers_under(errors, cfg.inlier_threshold_px);

  PoseEstimate out;
  out.initial = refit;
  out.refined = refit;
  out.inliers.pairs.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    out.inliers.pairs.emplace_back(static_cast<int>(i), static_cast<int>(i));
  out.inliers.inlier_mask = mask;
  out.residual_rms_px = rms_over_inliers(errors, mask);
  return out;
}

LiftedClouds lift_context(const Pixels& context_pixels, const PointCloud3& target_points,
                          const Pose& initial_pose, const CameraIntrinsics& K) {
  if (context_pixels.cols() != target_points.cols())
    throw DataError("lift_context: point/pixel count mismatch");
  const PointCloud3 moved = transform(initial_pose, target_points);

  LiftedClouds out;
  out.kept.reserve(static_cast<std::size_t>(context_pixels.cols()));
  for (Eigen::Index i = 0; i < context_pixels.cols(); ++i) {
    if (moved(2, i) <= 0.0) continue;
    out.kept.push_back(static_cast<int>(i));
  }
  const int m = static_cast<int>(out.kept.size());
  out.target.resize(3, m);
  Pixels pixels(2, m);
  Eigen::VectorXd depths(m);
  for (int j = 0; j < m; ++j) {
    const int i = out.kept[static_cast<std::size_t>(j)];
    out.target.col(j) = target_points.col(i);
    pixels.col(j) = context_pixels.col(i);
    depths(j) = moved(2, i);
  }
  out.context = m > 0 ? unproject(pixels, depths, K) : PointCloud3(3, 0);
  return out;
}

Pose procrustes(const PointCloud3& target_points, const PointCloud3& context_points) {
  const Eigen::Index n = target_points.cols();
  if (n != context_points.cols()) throw DataError("procrustes: cloud size mismatch");
  if (n < 3) throw DataError("procrustes: needs at least 3 points");

  const Eigen::Vector3d mean_t = target_points.rowwise().mean();
  const Eigen::Vector3d mean_c = context_points.rowwise().mean();
  const PointCloud3 Pt = target_points.colwise() - mean_t;
  const PointCloud3 Pc = context_points.colwise() - mean_c;

  const Eigen::Matrix3d H = Pc * Pt.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  // Negated form so an all-zero spectrum (fully collapsed cloud) also trips.
  if (!(sigma(1) > 1e-12 * sigma(0)))
    throw EstimationError("procrustes: degenerate point configuration");

  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d R = svd.matrixU() * D * svd.matrixV().transpose();
  return Pose(R, mean_c - R * mean_t);
}

ProcrustesGrad procrustes_backward(const PointCloud3& target_points,
                                   const PointCloud3& context_points,
                                   const Eigen::Matrix3d& grad_rotation,
                                   const Eigen::Vector3d& grad_translation) {
  const Eigen::Index n = target_points.cols();
  if (n != context_points.cols()) throw DataError("procrustes_backward: cloud size mismatch");
  const double inv_n = 1.0 / static_cast<double>(n);

  const Eigen::Vector3d mean_t = target_points.rowwise().mean();
  const Eigen::Vector3d mean_c = context_points.rowwise().mean();
  const PointCloud3 Pt = target_points.colwise() - mean_t;
  const PointCloud3 Pc = context_points.colwise() - mean_c;

  const Eigen::Matrix3d H = Pc * Pt.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sigma = svd.singularValues();
  if (!(sigma(1) > 1e-12 * sigma(0)))
    throw EstimationError("procrustes_backward: degenerate point configuration");
  const Eigen::Matrix3d U = svd.matrixU();
  const Eigen::Matrix3d V = svd.matrixV();
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  D(2, 2) = (U * V.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d R = U * D * V.transpose();

  // t = mean_c - R * mean_t, so part of the translation gradient flows
  // into the rotation and the centroids.
  const Eigen::Matrix3d G_R = grad_rotation - grad_translation * mean_t.transpose();

  ProcrustesGrad out;

  // The analytic rotation gradient divides by differences of squared
  // singular values; fall back to central differences when they collide.
  const double sigma_scale = std::max(sigma(0) * sigma(0), 1e-300);
  const double min_gap = std::min({std::abs(sigma(0) * sigma(0) - sigma(1) * sigma(1)),
                                   std::abs(sigma(0) * sigma(0) - sigma(2) * sigma(2)),
                                   std::abs(sigma(1) * sigma(1) - sigma(2) * sigma(2))});
  if (min_gap / sigma_scale < 1e-8) {
    out.fd_fallback = true;
    const double h = 1e-5 * std::max(1.0, std::sqrt(sigma(0)));
    auto directional = [&](const PointCloud3& tgt, const PointCloud3& ctx) {
      const Pose pose = procrustes(tgt, ctx);
      return grad_rotation.cwiseProduct(pose.rotation()).sum() +
             grad_translation.dot(pose.translation());
    };
    out.d_target.setZero(3, n);
    out.d_context.setZero(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int r = 0; r < 3; ++r) {
        PointCloud3 tgt = target_points;
        tgt(r, i) += h;
        const double up = directional(tgt, context_points);
        tgt(r, i) -= 2.0 * h;
        const double down = directional(tgt, context_points);
        out.d_target(r, i) = (up - down) / (2.0 * h);

        PointCloud3 ctx = context_points;
        ctx(r, i) += h;
        const double cup = directional(target_points, ctx);
        ctx(r, i) -= 2.0 * h;
        const double cdown = directional(target_points, ctx);
        out.d_context(r, i) = (cup - cdown) / (2.0 * h);
      }
    }
    return out;
  }

  // R = U D V^T with D constant, so dL/dU = G_R V D and dL/dV = G_R^T U D.
  const Eigen::Matrix3d Su = U.transpose() * (G_R * (V * D));
  const Eigen::Matrix3d Sv = V.transpose() * (G_R.transpose() * (U * D));
  const Eigen::Matrix3d asym_u = Su - Su.transpose();
  const Eigen::Matrix3d asym_v = Sv - Sv.transpose();

  // dL/dP for P = U^T dH V, built from the antisymmetric parts of the
  // U/V gradients and the singular-value spectrum.
  Eigen::Matrix3d dP = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double denom = sigma(j) * sigma(j) - sigma(i) * sigma(i);
      dP(i, j) = (asym_u(i, j) * sigma(j) + asym_v(i, j) * sigma(i)) / denom;
    }
  }
  const Eigen::Matrix3d dH = U * dP * V.transpose();

  // H = Pc * Pt^T, then undo the centering. The centroid terms collect the
  // translation path and the mean-subtraction path.
  const PointCloud3 dPc = dH * Pt;
  const PointCloud3 dPt = dH.transpose() * Pc;
  const Eigen::Vector3d dPc_colsum = dPc.rowwise().sum();
  const Eigen::Vector3d dPt_colsum = dPt.rowwise().sum();
  const Eigen::Vector3d d_mean_c = grad_translation;
  const Eigen::Vector3d d_mean_t = -R.transpose() * grad_translation;

  out.d_context = dPc.colwise() + inv_n * (d_mean_c - dPc_colsum);
  out.d_target = dPt.colwise() + inv_n * (d_mean_t - dPt_colsum);
  return out;
}

PoseEstimate estimate_relative_pose(const KeypointFrame& target, const KeypointFrame& context,
                                    const CameraIntrinsics& K, const RansacConfig& cfg,
                                    double match_max_distance) {
  cfg.validate();
  target.validate();
  context.validate();
  if (!target.has_depths()) throw DataError("estimate_relative_pose: target frame needs depths");

  const CorrespondenceSet matches = reciprocal_match(target, context, match_max_distance);
  const int m = matches.size();
  if (m < cfg.min_sample) throw EstimationError("estimate_relative_pose: too few matches");

  PointCloud3 target_cloud(3, m);
  Pixels context_pixels(2, m);
  {
    Pixels target_pixels(2, m);
    Eigen::VectorXd target_depths(m);
    for (int k = 0; k < m; ++k) {
      const auto [i, j] = matches.pairs[static_cast<std::size_t>(k)];
      target_pixels.col(k) = target.positions.col(i);
      target_depths(k) = target.depths(i);
      context_pixels.col(k) = context.positions.col(j);
    }
    target_cloud = unproject(target_pixels, target_depths, K);
  }

  const PoseEstimate ransac = pnp_ransac(target_cloud, context_pixels, K, cfg);

  // Closed-form correction on the RANSAC consensus set.
  const int n_inliers = ransac.inliers.inlier_count();
  PointCloud3 in_cloud(3, n_inliers);
  Pixels in_pixels(2, n_inliers);
  int k = 0;
  for (int i = 0; i < m; ++i) {
    if (!ransac.inliers.inlier_mask[static_cast<std::size_t>(i)]) continue;
    in_cloud.col(k) = target_cloud.col(i);
    in_pixels.col(k) = context_pixels.col(i);
    ++k;
  }
  Pose refined = ransac.initial;
  const LiftedClouds lifted = lift_context(in_pixels, in_cloud, ransac.initial, K);
  if (static_cast<int>(lifted.kept.size()) >= 3) {
    try {
      refined = procrustes(lifted.target, lifted.context);
    } catch (const EstimationError&) {
      // degenerate inlier cloud: keep the PnP pose
    }
  }

  const Eigen::VectorXd errors = reprojection_errors(refined, target_cloud, context_pixels, K);
  PoseEstimate out;
  out.initial = ransac.initial;
  out.refined = refined;
  out.inliers.pairs = matches.pairs;
  out.inliers.inlier_mask = inliers_under(errors, cfg.inlier_threshold_px);
  out.residual_rms_px = rms_over_inliers(errors, out.inliers.inlier_mask);
  return out;
}

}  // namespace dak
