#include "dak/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "dak/errors.hpp"

namespace dak {
namespace {

constexpr double kSmallAngle = 1e-6;          // Taylor branch threshold (radians)
constexpr std::uint32_t kMaxChainLength = 1000;  // composes before renormalization

void check_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string(what) + ": non-finite values");
}

}  // namespace

CameraIntrinsics::CameraIntrinsics(double fx_, double fy_, double cx_, double cy_)
    : fx(fx_), fy(fy_), cx(cx_), cy(cy_) {
  if (!(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy)))
    throw DataError("CameraIntrinsics: non-finite parameter");
  if (fx <= 0.0 || fy <= 0.0) throw DataError("CameraIntrinsics: focal lengths must be positive");
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  K(0, 0) = fx;
  K(1, 1) = fy;
  K(0, 2) = cx;
  K(1, 2) = cy;
  return K;
}

Pose::Pose() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  check_finite(rotation_, "Pose rotation");
  check_finite(translation_, "Pose translation");
  const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).norm();
  if (ortho > 1e-6) throw DataError("Pose: rotation is not orthonormal");
  if (std::abs(rotation_.determinant() - 1.0) > 1e-6)
    throw DataError("Pose: rotation determinant is not +1");
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  out.chain_length_ = chain_length_;
  return out;
}

Pose Pose::operator*(const Pose& other) const {
  Pose out;
  out.rotation_ = rotation_ * other.rotation_;
  out.translation_ = rotation_ * other.translation_ + translation_;
  out.chain_length_ = chain_length_ + other.chain_length_ + 1;
  if (out.chain_length_ > kMaxChainLength) {
    out.renormalize();
    out.chain_length_ = 0;
  }
  return out;
}

Eigen::Vector3d Pose::operator*(const Eigen::Vector3d& p) const {
  return rotation_ * p + translation_;
}

double Pose::orthonormality_error() const {
  return (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).norm();
}

void Pose::renormalize() {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  rotation_ = R;
}

Eigen::Matrix<double, 6, 1> Twist::vector() const {
  Eigen::Matrix<double, 6, 1> x;
  x.head<3>() = omega;
  x.tail<3>() = v;
  return x;
}

bool Projection::all_valid() const {
  return std::all_of(valid.begin(), valid.end(), [](std::uint8_t f) { return f != 0; });
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d S;
  S << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return S;
}

Projection project(const PointCloud3& points, const CameraIntrinsics& K) {
  check_finite(points, "project: points");
  const Eigen::Index n = points.cols();
  Projection out;
  out.pixels.setZero(2, n);
  out.valid.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = points(2, i);
    if (z <= 0.0) continue;
    out.pixels(0, i) = K.fx * points(0, i) / z + K.cx;
    out.pixels(1, i) = K.fy * points(1, i) / z + K.cy;
    out.valid[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

PointCloud3 unproject(const Pixels& pixels, const Eigen::VectorXd& depths,
                      const CameraIntrinsics& K) {
  check_finite(pixels, "unproject: pixels");
  check_finite(depths, "unproject: depths");
  if (pixels.cols() != depths.size())
    throw DataError("unproject: pixel/depth count mismatch");
  if ((depths.array() <= 0.0).any()) throw DataError("unproject: depths must be positive");
  const Eigen::Index n = pixels.cols();
  PointCloud3 out(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = depths(i);
    out(0, i) = (pixels(0, i) - K.cx) / K.fx * d;
    out(1, i) = (pixels(1, i) - K.cy) / K.fy * d;
    out(2, i) = d;
  }
  return out;
}

Pose se3_exp(const Twist& x) {
  const Eigen::Vector3d& w = x.omega;
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d W = skew(w);
  const Eigen::Matrix3d W2 = W * W;

  // R = I + A W + B W^2,  V = I + B W + C W^2,  t = V v.
  double A, B, C;
  if (theta < kSmallAngle) {
    A = 1.0 - theta2 / 6.0;
    B = 0.5 - theta2 / 24.0;
    C = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    A = std::sin(theta) / theta;
    // 1 - cos cancels catastrophically just above the series cutoff; the
    // half-angle identity 1 - cos = 2 sin^2(theta/2) is exact and stable.
    const double s_half = std::sin(0.5 * theta);
    B = 2.0 * s_half * s_half / theta2;
    C = (1.0 - A) / theta2;
  }
  const Eigen::Matrix3d R = Eigen::Matrix3d::Identity() + A * W + B * W2;
  const Eigen::Matrix3d V = Eigen::Matrix3d::Identity() + B * W + C * W2;
  return Pose(R, V * x.v);
}

Twist se3_log(const Pose& X) {
  const Eigen::Matrix3d& R = X.rotation();
  const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Eigen::Vector3d axis_raw(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));

  Eigen::Vector3d w;
  if (theta < kSmallAngle) {
    // 0.5 * theta / sin(theta) ~ 0.5 * (1 + theta^2 / 6)
    w = 0.5 * (1.0 + theta * theta / 6.0) * axis_raw;
  } else {
    w = theta / (2.0 * std::sin(theta)) * axis_raw;
  }

  // V^{-1} = I - W/2 + D W^2 with D = (1 - (theta/2) cot(theta/2)) / theta^2.
  const double theta2 = w.squaredNorm();
  const Eigen::Matrix3d W = skew(w);
  double D;
  if (theta < kSmallAngle) {
    D = 1.0 / 12.0 + theta2 / 720.0;
  } else {
    const double t = std::sqrt(theta2);
    const double half_cot = 0.5 * t * std::cos(0.5 * t) / std::sin(0.5 * t);
    D = (1.0 - half_cot) / theta2;
  }
  const Eigen::Matrix3d Vinv = Eigen::Matrix3d::Identity() - 0.5 * W + D * (W * W);
  return Twist(w, Vinv * X.translation());
}

Pose compose(const Pose& a, const Pose& b) { return a * b; }

Pose inverse(const Pose& a) { return a.inverse(); }

PointCloud3 transform(const Pose& X, const PointCloud3& points) {
  check_finite(points, "transform: points");
  return (X.rotation() * points).colwise() + X.translation();
}

PointCloud3 project_backward(const PointCloud3& points, const CameraIntrinsics& K,
                             const Pixels& grad_pixels) {
  if (points.cols() != grad_pixels.cols())
    throw DataError("project_backward: gradient size mismatch");
  const Eigen::Index n = points.cols();
  PointCloud3 grad = PointCloud3::Zero(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = points(2, i);
    if (z <= 0.0) continue;
    const double gu = grad_pixels(0, i);
    const double gv = grad_pixels(1, i);
    grad(0, i) = gu * K.fx / z;
    grad(1, i) = gv * K.fy / z;
    grad(2, i) = -(gu * K.fx * points(0, i) + gv * K.fy * points(1, i)) / (z * z);
  }
  return grad;
}

UnprojectGrad unproject_backward(const Pixels& pixels, const Eigen::VectorXd& depths,
                                 const CameraIntrinsics& K, const PointCloud3& grad_points) {
  if (pixels.cols() != grad_points.cols() || depths.size() != grad_points.cols())
    throw DataError("unproject_backward: gradient size mismatch");
  const Eigen::Index n = pixels.cols();
  UnprojectGrad grad;
  grad.pixels.setZero(2, n);
  grad.depths.setZero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = depths(i);
    const double gx = grad_points(0, i);
    const double gy = grad_points(1, i);
    const double gz = grad_points(2, i);
    grad.pixels(0, i) = gx * d / K.fx;
    grad.pixels(1, i) = gy * d / K.fy;
    grad.depths(i) = gx * (pixels(0, i) - K.cx) / K.fx + gy * (pixels(1, i) - K.cy) / K.fy + gz;
  }
  return grad;
}

TransformGrad transform_backward(const Pose& X, const PointCloud3& points,
                                 const PointCloud3& grad_out) {
  if (points.cols() != grad_out.cols())
    throw DataError("transform_backward: gradient size mismatch");
  TransformGrad grad;
  grad.points = X.rotation().transpose() * grad_out;
  grad.rotation = grad_out * points.transpose();
  grad.translation = grad_out.rowwise().sum();
  return grad;
}

}  // namespace dak
