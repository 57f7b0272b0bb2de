#include "dak/synth.hpp"

#include <algorithm>
#include <cmath>

#include "dak/errors.hpp"
#include "dak/random.hpp"

namespace dak {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kForwardStep = 2.0;          // scene units per frame
constexpr double kOrbitStepRad = kTwoPi / 240.0;  // 1.5 degrees per frame

// Draws a random unit vector of dimension d.
Eigen::VectorXd random_unit_vector(Rng& rng, int d) {
  Eigen::VectorXd v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = rng.gaussian();
  } while (v.norm() < 1e-9);
  return v / v.norm();
}

Trajectory make_trajectory(const SceneConfig& cfg, int n_frames, MotionModel motion, Rng& rng) {
  Trajectory traj;
  traj.poses.reserve(static_cast<std::size_t>(n_frames));
  const double z_mid = 0.5 * (cfg.depth_min + cfg.depth_max);
  for (int k = 0; k < n_frames; ++k) {
    switch (motion) {
      case MotionModel::kForwardDrive:
        traj.poses.emplace_back(Eigen::Matrix3d::Identity(),
                                Eigen::Vector3d(0.0, 0.0, kForwardStep * k));
        break;
      case MotionModel::kOrbit: {
        // Circles the point (0, 0, z_mid) while looking at it; frame 0 is
        // the identity.
        const double phi = kOrbitStepRad * k;
        const double s = std::sin(phi), c = std::cos(phi);
        const Eigen::Vector3d position(z_mid * s, 0.0, z_mid * (1.0 - c));
        Eigen::Matrix3d R;
        R.col(0) = Eigen::Vector3d(c, 0.0, s);    // camera x
        R.col(1) = Eigen::Vector3d(0.0, 1.0, 0.0);  // camera y
        R.col(2) = Eigen::Vector3d(-s, 0.0, c);   // camera z (view direction)
        traj.poses.emplace_back(R, position);
        break;
      }
      case MotionModel::kRandomWalk: {
        // Frame 0 is pinned to the identity but still consumes its draws so
        // the stream stays aligned per frame.
        Twist step;
        for (int i = 0; i < 3; ++i) step.omega(i) = 0.01 * rng.gaussian();
        for (int i = 0; i < 3; ++i) step.v(i) = 0.1 * rng.gaussian();
        traj.poses.push_back(k == 0 ? Pose::identity() : traj.poses.back() * se3_exp(step));
        break;
      }
    }
  }
  return traj;
}

// Per-frame keypoint observations of a fixed landmark set: projection,
// pixel/depth/descriptor noise, and labeled outliers, in a fixed draw order.
std::vector<SyntheticFrame> observe_frames(const SceneConfig& cfg,
                                           const PointCloud3& landmarks,
                                           const Eigen::MatrixXd& descriptors,
                                           const Trajectory& traj, Rng& rng) {
  const int n_frames = traj.size();
  const int n_landmarks = static_cast<int>(landmarks.cols());
  const double u_max = std::nextafter(static_cast<double>(cfg.image_width), 0.0);
  const double v_max = std::nextafter(static_cast<double>(cfg.image_height), 0.0);

  std::vector<SyntheticFrame> frames(static_cast<std::size_t>(n_frames));
  for (int k = 0; k < n_frames; ++k) {
    const Pose world_to_cam = traj.poses[static_cast<std::size_t>(k)].inverse();
    const PointCloud3 cam = transform(world_to_cam, landmarks);
    const Projection proj = project(cam, cfg.intrinsics);

    std::vector<int> visible;
    for (int i = 0; i < n_landmarks; ++i) {
      if (!proj.valid[static_cast<std::size_t>(i)]) continue;
      const Eigen::Vector2d p = proj.pixels.col(i);
      if (p.x() < 0.0 || p.x() >= cfg.image_width || p.y() < 0.0 || p.y() >= cfg.image_height)
        continue;
      visible.push_back(i);
    }
    if (visible.empty()) throw DataError("synth: a frame sees no landmarks");

    SyntheticFrame& frame = frames[static_cast<std::size_t>(k)];
    const int m = static_cast<int>(visible.size());
    frame.keypoints.positions.resize(2, m);
    frame.keypoints.descriptors.resize(cfg.descriptor_dim, m);
    frame.keypoints.scores.resize(m);
    frame.keypoints.depths.resize(m);
    frame.keypoints.width = cfg.image_width;
    frame.keypoints.height = cfg.image_height;
    frame.landmark_ids = visible;
    frame.outlier_labels.assign(static_cast<std::size_t>(m), 0);

    for (int j = 0; j < m; ++j) {
      const int id = visible[static_cast<std::size_t>(j)];
      double u = proj.pixels(0, id) + cfg.pixel_noise_sigma * rng.gaussian();
      double v = proj.pixels(1, id) + cfg.pixel_noise_sigma * rng.gaussian();
      u = std::clamp(u, 0.0, u_max);
      v = std::clamp(v, 0.0, v_max);

      double depth = cam(2, id) * (1.0 + cfg.depth_noise_sigma * rng.gaussian());
      depth = std::max(depth, 1e-3 * cam(2, id));

      Eigen::VectorXd desc = descriptors.col(id);
      for (int c = 0; c < cfg.descriptor_dim; ++c)
        desc(c) += cfg.descriptor_noise_sigma * rng.gaussian();
      const double norm = desc.norm();
      if (norm > 1e-12) desc /= norm;

      const double score = rng.uniform(0.2, 1.0);
      const bool outlier = rng.uniform() < cfg.outlier_rate;
      if (outlier) {
        u = rng.uniform(0.0, static_cast<double>(cfg.image_width));
        v = rng.uniform(0.0, static_cast<double>(cfg.image_height));
        desc = random_unit_vector(rng, cfg.descriptor_dim);
        frame.outlier_labels[static_cast<std::size_t>(j)] = 1;
      }

      frame.keypoints.positions.col(j) = Eigen::Vector2d(u, v);
      frame.keypoints.descriptors.col(j) = desc;
      frame.keypoints.scores(j) = score;
      frame.keypoints.depths(j) = depth;
    }
  }
  return frames;
}

Eigen::Vector3d intersect_plane(const PlaneModel& plane, const Pose& cam_to_world, double u,
                                double v, const CameraIntrinsics& K, double* depth_out) {
  const Eigen::Vector3d dir_cam((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
  const Eigen::Vector3d dir_w = cam_to_world.rotation() * dir_cam;
  const Eigen::Vector3d origin = cam_to_world.translation();
  const double denom = plane.normal.dot(dir_w);
  if (std::abs(denom) < 1e-12) throw DataError("synth: view ray parallel to the plane");
  const double lambda = (plane.offset - plane.normal.dot(origin)) / denom;
  if (lambda <= 0.0) throw DataError("synth: plane behind the camera");
  if (depth_out) *depth_out = lambda;
  return origin + lambda * dir_w;
}

// In-plane coordinates used to parameterize the texture.
void plane_basis(const PlaneModel& plane, Eigen::Vector3d* e1, Eigen::Vector3d* e2) {
  const Eigen::Vector3d n = plane.normal.normalized();
  *e1 = n.unitOrthogonal();
  *e2 = n.cross(*e1);
}

}  // namespace

MotionModel motion_model_from_string(const std::string& name) {
  if (name == "random-walk") return MotionModel::kRandomWalk;
  if (name == "forward-drive") return MotionModel::kForwardDrive;
  if (name == "orbit") return MotionModel::kOrbit;
  throw DataError("unknown motion model: " + name);
}

std::string to_string(MotionModel model) {
  switch (model) {
    case MotionModel::kRandomWalk: return "random-walk";
    case MotionModel::kForwardDrive: return "forward-drive";
    case MotionModel::kOrbit: return "orbit";
  }
  throw DataError("invalid motion model value");
}

void SceneConfig::validate() const {
  if (n_points < 1) throw DataError("SceneConfig: n_points must be positive");
  if (!(depth_min > 0.0) || !(depth_max > depth_min))
    throw DataError("SceneConfig: depth range must satisfy 0 < min < max");
  if (image_width < 2 || image_height < 2) throw DataError("SceneConfig: image too small");
  if (!(outlier_rate >= 0.0 && outlier_rate < 1.0))
    throw DataError("SceneConfig: outlier_rate must lie in [0, 1)");
  if (descriptor_dim < 1) throw DataError("SceneConfig: descriptor_dim must be positive");
  if (pixel_noise_sigma < 0.0 || descriptor_noise_sigma < 0.0 || depth_noise_sigma < 0.0)
    throw DataError("SceneConfig: noise levels must be non-negative");
}

SyntheticSequence generate_point_scene(const SceneConfig& cfg, int n_frames, MotionModel motion) {
  cfg.validate();
  if (n_frames < 2) throw DataError("generate_point_scene: needs at least 2 frames");

  Rng rng(cfg.seed);
  SyntheticSequence seq;
  seq.trajectory_gt = make_trajectory(cfg, n_frames, motion, rng);

  // Landmarks are seeded in the view frusta spread along the trajectory, so
  // every part of the path keeps co-visible structure.
  seq.landmarks.resize(3, cfg.n_points);
  seq.true_descriptors.resize(cfg.descriptor_dim, cfg.n_points);
  for (int i = 0; i < cfg.n_points; ++i) {
    const int frame = static_cast<int>((static_cast<long>(i) * n_frames) / cfg.n_points);
    const double u = rng.uniform(0.0, static_cast<double>(cfg.image_width));
    const double v = rng.uniform(0.0, static_cast<double>(cfg.image_height));
    const double z = rng.uniform(cfg.depth_min, cfg.depth_max);
    const Eigen::Vector3d cam((u - cfg.intrinsics.cx) / cfg.intrinsics.fx * z,
                              (v - cfg.intrinsics.cy) / cfg.intrinsics.fy * z, z);
    seq.landmarks.col(i) = seq.trajectory_gt.poses[static_cast<std::size_t>(frame)] * cam;
    seq.true_descriptors.col(i) = random_unit_vector(rng, cfg.descriptor_dim);
  }

  seq.frames = observe_frames(cfg, seq.landmarks, seq.true_descriptors, seq.trajectory_gt, rng);
  return seq;
}

double PlanarTexture::eval(double px, double py) const {
  double sum = 0.0;
  for (const Wave& w : waves) sum += w.amplitude * std::sin(w.kx * px + w.ky * py + w.phase);
  return 0.5 + 0.4 * sum / amplitude_sum;
}

PlanarTexture make_plane_texture(std::uint64_t seed, double max_cycles_per_px,
                                 const CameraIntrinsics& K, double plane_depth) {
  if (!(max_cycles_per_px > 0.0) || !(plane_depth > 0.0))
    throw DataError("make_plane_texture: invalid parameters");
  // Plane units covered by one pixel at the nominal depth.
  const double footprint = plane_depth / std::min(K.fx, K.fy);
  const double f_max = max_cycles_per_px / footprint;

  Rng rng(seed);
  PlanarTexture tex;
  tex.waves.resize(8);
  tex.amplitude_sum = 0.0;
  for (PlanarTexture::Wave& w : tex.waves) {
    w.amplitude = rng.uniform(0.5, 1.0);
    const double f = rng.uniform(0.3, 1.0) * f_max;
    const double theta = rng.uniform(0.0, kTwoPi);
    w.kx = kTwoPi * f * std::cos(theta);
    w.ky = kTwoPi * f * std::sin(theta);
    w.phase = rng.uniform(0.0, kTwoPi);
    tex.amplitude_sum += w.amplitude;
  }
  return tex;
}

Image render_plane_image(const PlanarTexture& texture, const PlaneModel& plane,
                         const Pose& cam_to_world, const CameraIntrinsics& K, int width,
                         int height) {
  Eigen::Vector3d e1, e2;
  plane_basis(plane, &e1, &e2);
  Image img(height, width, 1, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d p = intersect_plane(plane, cam_to_world, x, y, K, nullptr);
      img.at(y, x) = texture.eval(e1.dot(p), e2.dot(p));
    }
  }
  return img;
}

DepthMap render_plane_depth(const PlaneModel& plane, const Pose& cam_to_world,
                            const CameraIntrinsics& K, int width, int height) {
  DepthMap depth(height, width, 1.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double d = 0.0;
      intersect_plane(plane, cam_to_world, x, y, K, &d);
      depth.at(y, x) = d;
    }
  }
  return depth;
}

Eigen::Matrix3d plane_homography(const PlaneModel& plane, const Pose& cam_a_to_world,
                                 const Pose& cam_b_to_world, const CameraIntrinsics& K) {
  const Pose a_to_b = cam_b_to_world.inverse() * cam_a_to_world;
  // Plane expressed in camera-a coordinates: n_a . X = d_a.
  const Eigen::Vector3d n_a = cam_a_to_world.rotation().transpose() * plane.normal;
  const double d_a = plane.offset - plane.normal.dot(cam_a_to_world.translation());
  if (std::abs(d_a) < 1e-12) throw DataError("plane_homography: camera lies on the plane");
  const Eigen::Matrix3d Km = K.matrix();
  const Eigen::Matrix3d H_metric =
      a_to_b.rotation() + (a_to_b.translation() / d_a) * n_a.transpose();
  return Km * H_metric * Km.inverse();
}

SyntheticSequence generate_planar_scene(const SceneConfig& cfg, int n_frames,
                                        std::uint64_t texture_seed) {
  cfg.validate();
  if (n_frames < 2) throw DataError("generate_planar_scene: needs at least 2 frames");

  const double z0 = 0.5 * (cfg.depth_min + cfg.depth_max);
  SyntheticSequence seq;
  seq.plane = PlaneModel{Eigen::Vector3d(0.0, 0.0, 1.0), z0};
  const PlanarTexture texture =
      make_plane_texture(texture_seed, 0.015, cfg.intrinsics, z0);

  Rng rng(cfg.seed);
  // A gentle wander keeps the plane covering the full field of view.
  Trajectory traj;
  traj.poses.push_back(Pose::identity());
  for (int k = 1; k < n_frames; ++k) {
    Twist step;
    for (int i = 0; i < 3; ++i) step.omega(i) = 0.004 * rng.gaussian();
    for (int i = 0; i < 3; ++i) step.v(i) = 0.01 * z0 * rng.gaussian();
    traj.poses.push_back(traj.poses.back() * se3_exp(step));
  }
  seq.trajectory_gt = traj;

  // Landmarks live on the plane, sampled through frame-0 pixels.
  seq.landmarks.resize(3, cfg.n_points);
  seq.true_descriptors.resize(cfg.descriptor_dim, cfg.n_points);
  for (int i = 0; i < cfg.n_points; ++i) {
    const double u = rng.uniform(0.0, static_cast<double>(cfg.image_width));
    const double v = rng.uniform(0.0, static_cast<double>(cfg.image_height));
    seq.landmarks.col(i) =
        intersect_plane(*seq.plane, traj.poses.front(), u, v, cfg.intrinsics, nullptr);
    seq.true_descriptors.col(i) = random_unit_vector(rng, cfg.descriptor_dim);
  }

  seq.frames = observe_frames(cfg, seq.landmarks, seq.true_descriptors, traj, rng);
  for (int k = 0; k < n_frames; ++k) {
    SyntheticFrame& frame = seq.frames[static_cast<std::size_t>(k)];
    const Pose& pose = traj.poses[static_cast<std::size_t>(k)];
    frame.image = render_plane_image(texture, *seq.plane, pose, cfg.intrinsics,
                                     cfg.image_width, cfg.image_height);
    frame.depth = render_plane_depth(*seq.plane, pose, cfg.intrinsics, cfg.image_width,
                                     cfg.image_height);
  }
  return seq;
}

HomographyWarp apply_homography(const Pixels& pixels, const Eigen::Matrix3d& H) {
  const double scale = H.norm();
  if (!(scale > 0.0) || !H.allFinite()) throw DataError("apply_homography: invalid matrix");
  // The w ~ 0 test is relative to the matrix scale (H is homogeneous), but
  // the division itself uses the raw entries so that e.g. the identity warp
  // is bit-exact.
  const double w_min = 1e-12 * scale;
  HomographyWarp out;
  out.pixels.setZero(2, pixels.cols());
  out.valid.assign(static_cast<std::size_t>(pixels.cols()), 0);
  for (Eigen::Index i = 0; i < pixels.cols(); ++i) {
    const Eigen::Vector3d q = H * Eigen::Vector3d(pixels(0, i), pixels(1, i), 1.0);
    if (std::abs(q.z()) < w_min) continue;
    out.pixels(0, i) = q.x() / q.z();
    out.pixels(1, i) = q.y() / q.z();
    out.valid[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

}  // namespace dak
