#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace dak {

// 3xN cloud of 3D points, one point per column.
using PointCloud3 = Eigen::Matrix3Xd;
// 2xN array of pixel coordinates (u, v), one point per column.
using Pixels = Eigen::Matrix2Xd;

// Pinhole camera intrinsics, no distortion.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  CameraIntrinsics() = default;
  CameraIntrinsics(double fx_, double fy_, double cx_, double cy_);

  Eigen::Matrix3d matrix() const;
};

// Rigid-body transform x' = R x + t with R in SO(3). Long compose chains
// re-orthonormalize themselves, so accumulated products stay on the manifold.
class Pose {
 public:
  Pose();  // identity
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose identity() { return Pose(); }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Pose inverse() const;
  // Composition: (a * b)(x) = a(b(x)).
  Pose operator*(const Pose& other) const;
  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const;

  // Frobenius norm of R^T R - I.
  double orthonormality_error() const;
  // Projects the rotation back onto SO(3) (nearest rotation by SVD).
  void renormalize();

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
  std::uint32_t chain_length_ = 0;  // compositions since last renormalization
};

// Tangent-space element of SE(3): rotation part `omega` (axis-angle,
// radians) and translation part `v`.
struct Twist {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& omega_, const Eigen::Vector3d& v_) : omega(omega_), v(v_) {}
  // Packs/unpacks the 6-vector [omega; v].
  explicit Twist(const Eigen::Matrix<double, 6, 1>& x) : omega(x.head<3>()), v(x.tail<3>()) {}
  Eigen::Matrix<double, 6, 1> vector() const;
};

// Similarity transform x' = scale * R x + t.
struct Sim3 {
  double scale = 1.0;
  Pose pose;

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return scale * (pose.rotation() * p) + pose.translation();
  }
};

// Result of projecting a cloud: pixel coordinates plus one flag per point,
// false where the point lies at or behind the camera plane (those pixel
// columns are zeroed, never NaN).
struct Projection {
  Pixels pixels;
  std::vector<std::uint8_t> valid;

  bool all_valid() const;
};

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

Projection project(const PointCloud3& points, const CameraIntrinsics& K);

// Lifts pixels to camera-frame 3D points. All depths must be positive.
PointCloud3 unproject(const Pixels& pixels, const Eigen::VectorXd& depths,
                      const CameraIntrinsics& K);

// Exponential map se(3) -> SE(3) and its inverse. The log is valid away
// from the pi-rotation singularity.
Pose se3_exp(const Twist& x);
Twist se3_log(const Pose& X);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& a);
PointCloud3 transform(const Pose& X, const PointCloud3& points);

// ---- adjoints -------------------------------------------------------------
// Each `*_backward` maps the gradient of a scalar loss with respect to the
// op's output back to gradients with respect to its inputs.

// Points flagged invalid by the forward pass receive zero gradient.
PointCloud3 project_backward(const PointCloud3& points, const CameraIntrinsics& K,
                             const Pixels& grad_pixels);

struct UnprojectGrad {
  Pixels pixels;
  Eigen::VectorXd depths;
};
UnprojectGrad unproject_backward(const Pixels& pixels, const Eigen::VectorXd& depths,
                                 const CameraIntrinsics& K, const PointCloud3& grad_points);

struct TransformGrad {
  PointCloud3 points;
  Eigen::Matrix3d rotation;
  Eigen::Vector3d translation;
};
TransformGrad transform_backward(const Pose& X, const PointCloud3& points,
                                 const PointCloud3& grad_out);

}  // namespace dak
