#include "dak/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

#include "dak/errors.hpp"
#include "dak/losses.hpp"
#include "dak/pose_estimation.hpp"
#include "dak/random.hpp"

namespace dak {
namespace {

double central_diff(const std::function<double(double)>& phi, double h) {
  return (phi(h) - phi(-h)) / (2.0 * h);
}

double rel_error(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-4});
}

Eigen::MatrixXd gauss_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = scale * rng.gaussian();
  return m;
}

Eigen::MatrixXd uniform_matrix(Rng& rng, int rows, int cols, double lo, double hi) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(lo, hi);
  return m;
}

// Interior coordinates at least 0.2 px from the interpolation lattice, so
// finite differencing never crosses a bilinear cell boundary.
Pixels lattice_safe_coords(Rng& rng, int m, int width, int height) {
  Pixels p(2, m);
  for (int i = 0; i < m; ++i) {
    p(0, i) = rng.uniform_int(width - 1) + rng.uniform(0.2, 0.8);
    p(1, i) = rng.uniform_int(height - 1) + rng.uniform(0.2, 0.8);
  }
  return p;
}

Image random_image(Rng& rng, int h, int w, int c, double lo, double hi) {
  Image img(h, w, c);
  for (double& v : img.data) v = rng.uniform(lo, hi);
  return img;
}

Image add_scaled(const Image& img, const Image& dir, double eps) {
  Image out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += eps * dir.data[i];
  return out;
}

double dot(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

using RowFn = std::function<double(Rng&)>;  // one instance -> relative error

GradCheckRow run_row(const std::string& name, std::uint64_t seed, const RowFn& instance) {
  GradCheckRow row;
  row.name = name;
  Rng rng(seed);
  for (int k = 0; k < 10; ++k) row.max_rel_error = std::max(row.max_rel_error, instance(rng));
  row.pass = row.max_rel_error < 1e-4;
  return row;
}

double check_procrustes(Rng& rng) {
  const int n = 12;
  const PointCloud3 target = gauss_matrix(rng, 3, n, 2.0);
  const Twist tw(0.3 * Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian()),
                 Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian()));
  PointCloud3 context = transform(se3_exp(tw), target) + gauss_matrix(rng, 3, n, 0.05);
  const Eigen::Matrix3d grad_R = gauss_matrix(rng, 3, 3);
  const Eigen::Vector3d grad_t(rng.gaussian(), rng.gaussian(), rng.gaussian());

  const ProcrustesGrad g = procrustes_backward(target, context, grad_R, grad_t);
  const PointCloud3 dT = gauss_matrix(rng, 3, n);
  const PointCloud3 dC = gauss_matrix(rng, 3, n);
  const double analytic =
      (g.d_target.array() * dT.array()).sum() + (g.d_context.array() * dC.array()).sum();
  const auto phi = [&](double e) {
    const Pose P = procrustes(target + e * dT, context + e * dC);
    return (grad_R.array() * P.rotation().array()).sum() + grad_t.dot(P.translation());
  };
  return rel_error(analytic, central_diff(phi, 1e-5));
}

double check_geometric(Rng& rng) {
  const int m = 15;
  const Pixels warped = uniform_matrix(rng, 2, m, 0.0, 100.0);
  const Pixels context = warped + gauss_matrix(rng, 2, m, 1.0);
  const GeometricLoss loss = geometric_loss(warped, context);
  const Pixels dW = gauss_matrix(rng, 2, m);
  const Pixels dC = gauss_matrix(rng, 2, m);
  const double analytic =
      (loss.d_warped.array() * dW.array()).sum() + (loss.d_context.array() * dC.array()).sum();
  const auto phi = [&](double e) {
    return geometric_loss(warped + e * dW, context + e * dC).value;
  };
  return rel_error(analytic, central_diff(phi, 1e-5));
}

double check_triplet(Rng& rng) {
  const int d = 16, m = 10;
  Eigen::MatrixXd anchor = gauss_matrix(rng, d, m);
  Eigen::MatrixXd positive = anchor + gauss_matrix(rng, d, m, 0.3);
  Eigen::MatrixXd negative = anchor + gauss_matrix(rng, d, m, 0.6);
  anchor.colwise().normalize();
  positive.colwise().normalize();
  negative.colwise().normalize();

  const TripletLoss loss = descriptor_triplet_loss(anchor, positive, negative, 0.2);
  const Eigen::MatrixXd dA = gauss_matrix(rng, d, m);
  const Eigen::MatrixXd dP = gauss_matrix(rng, d, m);
  const Eigen::MatrixXd dN = gauss_matrix(rng, d, m);
  const double analytic = (loss.d_anchor.array() * dA.array()).sum() +
                          (loss.d_positive.array() * dP.array()).sum() +
                          (loss.d_negative.array() * dN.array()).sum();
  const auto phi = [&](double e) {
    return descriptor_triplet_loss(anchor + e * dA, positive + e * dP, negative + e * dN, 0.2)
        .value;
  };
  return rel_error(analytic, central_diff(phi, 1e-5));
}

double check_score(Rng& rng) {
  const int m = 12;
  const Eigen::VectorXd st = uniform_matrix(rng, m, 1, 0.1, 0.9);
  const Eigen::VectorXd sc = uniform_matrix(rng, m, 1, 0.1, 0.9);
  const Pixels warped = uniform_matrix(rng, 2, m, 0.0, 50.0);
  const Pixels context = warped + gauss_matrix(rng, 2, m, 0.5);

  const ScoreLoss loss = score_loss(st, sc, warped, context);
  const Eigen::VectorXd dst = gauss_matrix(rng, m, 1);
  const Eigen::VectorXd dsc = gauss_matrix(rng, m, 1);
  const Pixels dW = gauss_matrix(rng, 2, m);
  const Pixels dC = gauss_matrix(rng, 2, m);
  const double analytic =
      loss.d_target_scores.dot(dst) + loss.d_context_scores.dot(dsc) +
      (loss.d_warped.array() * dW.array()).sum() + (loss.d_context.array() * dC.array()).sum();
  const auto phi = [&](double e) {
    return score_loss(st + e * dst, sc + e * dsc, warped + e * dW, context + e * dC).value;
  };
  return rel_error(analytic, central_diff(phi, 1e-5));
}

double check_bilinear(Rng& rng) {
  const Image img = random_image(rng, 9, 11, 2, 0.05, 0.95);
  const int m = 6;
  const Pixels coords = lattice_safe_coords(rng, m, img.width, img.height);
  const Eigen::MatrixXd grad_values = gauss_matrix(rng, m, img.channels);

  const Pixels analytic_grad = bilinear_sample_backward(img, coords, grad_values);
  const Pixels dC = gauss_matrix(rng, 2, m);
  const double analytic = (analytic_grad.array() * dC.array()).sum();
  const auto phi = [&](double e) {
    const BilinearImageResult r = bilinear_sample(img, coords + e * dC);
    return (r.values.array() * grad_values.array()).sum();
  };
  return rel_error(analytic, central_diff(phi, 1e-6));
}

double check_photometric(Rng& rng) {
  const Image target = random_image(rng, 12, 14, 2, 0.25, 0.75);
  const Image synth = random_image(rng, 12, 14, 2, 0.25, 0.75);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(12) * 14);
  for (auto& v : mask) v = rng.uniform() < 0.85 ? 1 : 0;
  mask[0] = 1;

  const Image grad = photometric_loss_backward(target, synth, 0.85, &mask);
  Image dir(12, 14, 2);
  for (double& v : dir.data) v = rng.uniform(-1.0, 1.0);
  const double analytic = dot(grad, dir);
  const auto phi = [&](double e) {
    return photometric_loss(target, add_scaled(synth, dir, e), 0.85, &mask).value;
  };
  return rel_error(analytic, central_diff(phi, 1e-5));
}

double check_smoothness(Rng& rng) {
  const int h = 10, w = 12;
  DepthMap depth(h, w);
  // Keep neighboring depths clearly separated so the |.| terms in the loss
  // stay away from their kinks under the finite-difference step.
  for (int tries = 0; tries < 100; ++tries) {
    for (double& v : depth.data) v = 3.0 + rng.uniform(0.0, 4.0);
    double min_diff = 1e9;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x)
        min_diff = std::min(min_diff, std::abs(depth.at(y, x + 1) - depth.at(y, x)));
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x)
        min_diff = std::min(min_diff, std::abs(depth.at(y + 1, x) - depth.at(y, x)));
    if (min_diff > 1e-3) break;
  }
  const Image image = random_image(rng, h, w, 1, 0.0, 1.0);

  const SmoothnessLoss loss = smoothness_loss(depth, image);
  DepthMap dir(h, w);
  for (double& v : dir.data) v = rng.uniform(-1.0, 1.0);
  double analytic = 0.0;
  for (std::size_t i = 0; i < dir.data.size(); ++i)
    analytic += loss.d_depth.data[i] * dir.data[i];
  const auto phi = [&](double e) {
    DepthMap d = depth;
    for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] += e * dir.data[i];
    return smoothness_loss(d, image).value;
  };
  return rel_error(analytic, central_diff(phi, 1e-6));
}

double check_depth_consistency(Rng& rng) {
  const int h = 10, w = 12, m = 10;
  DepthMap context_depth(h, w);
  for (double& v : context_depth.data) v = rng.uniform(3.0, 8.0);
  const Eigen::VectorXd target_depths = uniform_matrix(rng, m, 1, 3.0, 8.0);
  const Pixels pixels = lattice_safe_coords(rng, m, w, h);

  const DepthConsistencyLoss loss = depth_consistency_loss(target_depths, context_depth, pixels);
  const Eigen::VectorXd dD = gauss_matrix(rng, m, 1);
  const Pixels dP = gauss_matrix(rng, 2, m, 0.05);
  const double analytic =
      loss.d_target_depths.dot(dD) + (loss.d_context_pixels.array() * dP.array()).sum();
  const auto phi = [&](double e) {
    return depth_consistency_loss(target_depths + e * dD, context_depth, pixels + e * dP).value;
  };
  return rel_error(analytic, central_diff(phi, 1e-6));
}

}  // namespace

VoResult run_vo(const std::vector<KeypointFrame>& frames, const RunConfig& config) {
  config.validate();
  if (frames.size() < 2) throw DataError("vo: a sequence needs at least 2 frames");

  VoResult out;
  out.trajectory.poses.reserve(frames.size());
  out.trajectory.poses.push_back(Pose::identity());
  out.diagnostics.reserve(frames.size() - 1);

  for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
    RansacConfig rc = config.ransac;
    rc.seed = config.ransac.seed + k;  // decorrelated per pair, still deterministic

    VoFrameDiagnostics diag;
    diag.frame = static_cast<int>(k) + 1;
    Pose relative;  // camera k -> camera k+1
    try {
      const PoseEstimate est = estimate_relative_pose(frames[k], frames[k + 1],
                                                      config.intrinsics, rc,
                                                      config.match_max_distance);
      relative = est.refined;
      diag.n_matches = est.inliers.size();
      diag.n_inliers = est.inliers.inlier_count();
      diag.residual_rms_px = est.residual_rms_px;
    } catch (const EstimationError&) {
      diag.fallback = true;
    }
    out.trajectory.poses.push_back(out.trajectory.poses.back() * relative.inverse());
    out.diagnostics.push_back(diag);
  }
  return out;
}

std::vector<std::string> list_feature_files(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError(dir + ": not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".dakf")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end(),
            [](const std::string& a, const std::string& b) {
              return fs::path(a).filename().string() < fs::path(b).filename().string();
            });
  if (paths.size() < 2)
    throw DataError(dir + ": found " + std::to_string(paths.size()) +
                    " feature file(s), need at least 2");
  return paths;
}

std::vector<GradCheckRow> run_gradcheck(std::uint64_t seed) {
  std::vector<GradCheckRow> rows;
  rows.push_back(run_row("procrustes_backward", seed + 1, check_procrustes));
  rows.push_back(run_row("geometric_loss", seed + 2, check_geometric));
  rows.push_back(run_row("descriptor_triplet_loss", seed + 3, check_triplet));
  rows.push_back(run_row("score_loss", seed + 4, check_score));
  rows.push_back(run_row("bilinear_sample", seed + 5, check_bilinear));
  rows.push_back(run_row("photometric_loss", seed + 6, check_photometric));
  rows.push_back(run_row("smoothness_loss", seed + 7, check_smoothness));
  rows.push_back(run_row("depth_consistency_loss", seed + 8, check_depth_consistency));
  return rows;
}

}  // namespace dak
