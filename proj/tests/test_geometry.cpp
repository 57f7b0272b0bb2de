#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dak/errors.hpp"
#include "dak/geometry.hpp"
#include "dak/random.hpp"
#include "oracles.hpp"

using namespace dak;

namespace {
const CameraIntrinsics kK(525.0, 525.0, 319.5, 239.5);
}

TEST_CASE("intrinsics matrix layout and validation") {
  const Eigen::Matrix3d K = kK.matrix();
  CHECK(K(0, 0) == 525.0);
  CHECK(K(1, 1) == 525.0);
  CHECK(K(0, 2) == 319.5);
  CHECK(K(1, 2) == 239.5);
  CHECK(K(2, 2) == 1.0);
  CHECK(K(1, 0) == 0.0);
  CHECK_THROWS_AS(CameraIntrinsics(0.0, 525.0, 0.0, 0.0), DataError);
  CHECK_THROWS_AS(CameraIntrinsics(525.0, -1.0, 0.0, 0.0), DataError);
}

TEST_CASE("skew matrix reproduces the cross product") {
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Vector3d w = oracle::gauss3(rng);
    const Eigen::Vector3d v = oracle::gauss3(rng);
    const Eigen::Matrix3d S = skew(w);
    CHECK((S + S.transpose()).norm() == 0.0);
    CHECK((S * v - w.cross(v)).norm() == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("projection of the optical axis hits the principal point") {
  PointCloud3 pts(3, 1);
  pts << 0.0, 0.0, 7.0;
  const Projection proj = project(pts, kK);
  CHECK(proj.all_valid());
  CHECK(proj.pixels(0, 0) == kK.cx);
  CHECK(proj.pixels(1, 0) == kK.cy);
}

TEST_CASE("points at or behind the camera plane are flagged and zeroed") {
  PointCloud3 pts(3, 3);
  pts.col(0) = Eigen::Vector3d(1.0, 1.0, 5.0);
  pts.col(1) = Eigen::Vector3d(1.0, 1.0, 0.0);
  pts.col(2) = Eigen::Vector3d(1.0, 1.0, -2.0);
  const Projection proj = project(pts, kK);
  CHECK(proj.valid[0] == 1);
  CHECK(proj.valid[1] == 0);
  CHECK(proj.valid[2] == 0);
  CHECK(proj.pixels.col(1).norm() == 0.0);
  CHECK(proj.pixels.col(2).norm() == 0.0);
  CHECK_FALSE(proj.all_valid());
}

TEST_CASE("unproject inverts project for positive depths") {
  Rng rng(7);
  const int n = 50;
  PointCloud3 pts(3, n);
  for (int i = 0; i < n; ++i) {
    const double z = rng.uniform(0.5, 50.0);
    pts.col(i) = Eigen::Vector3d(rng.uniform(-2.0, 2.0) * z, rng.uniform(-1.5, 1.5) * z, z);
  }
  const Projection proj = project(pts, kK);
  REQUIRE(proj.all_valid());
  const PointCloud3 back = unproject(proj.pixels, pts.row(2).transpose(), kK);
  CHECK((back - pts).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("unproject rejects non-positive depths") {
  Pixels px(2, 1);
  px << 10.0, 20.0;
  Eigen::VectorXd d(1);
  d << 0.0;
  CHECK_THROWS_AS(unproject(px, d, kK), DataError);
  d << -1.0;
  CHECK_THROWS_AS(unproject(px, d, kK), DataError);
}

TEST_CASE("exp map: zero twist gives the identity") {
  const Pose X = se3_exp(Twist());
  CHECK((X.rotation() - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK(X.translation().norm() == 0.0);
}

TEST_CASE("exp map: pure translation moves without rotating") {
  const Eigen::Vector3d v(1.0, -2.0, 3.0);
  const Pose X = se3_exp(Twist(Eigen::Vector3d::Zero(), v));
  CHECK((X.rotation() - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK((X.translation() - v).norm() == 0.0);
}

TEST_CASE("exp map matches the matrix power series") {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    Twist x(oracle::gauss3(rng, 0.5), oracle::gauss3(rng, 0.8));
    if (x.omega.norm() > 1.5) x.omega *= 1.5 / x.omega.norm();
    const Eigen::Matrix4d ref = oracle::expm_series(oracle::hat_se3(x));
    const Pose X = se3_exp(x);
    CHECK((X.rotation() - ref.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((X.translation() - ref.topRightCorner<3, 1>()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("exp map is seamless across the small-angle branch") {
  Rng rng(13);
  for (double theta : {1e-9, 1e-7, 9.9e-7, 1.01e-6, 1e-5}) {
    const Eigen::Vector3d axis = oracle::gauss3(rng).normalized();
    const Twist x(theta * axis, Eigen::Vector3d(0.1, 0.2, -0.3));
    const Eigen::Matrix4d ref = oracle::expm_series(oracle::hat_se3(x));
    const Pose X = se3_exp(x);
    CHECK((X.rotation() - ref.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((X.translation() - ref.topRightCorner<3, 1>()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(X.orthonormality_error() < 1e-14);
  }
}

TEST_CASE("log inverts exp away from the pi singularity") {
  Rng rng(17);
  for (int k = 0; k < 200; ++k) {
    Twist x(oracle::gauss3(rng, 0.8), oracle::gauss3(rng, 1.5));
    if (x.omega.norm() > 3.0) x.omega *= 3.0 / x.omega.norm();
    const Twist back = se3_log(se3_exp(x));
    CHECK((back.omega - x.omega).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((back.v - x.v).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("exp inverts log on random poses") {
  Rng rng(19);
  for (int k = 0; k < 100; ++k) {
    const Pose X = oracle::random_pose(rng, 0.8, 2.0);
    const Pose back = se3_exp(se3_log(X));
    CHECK((back.rotation() - X.rotation()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.translation() - X.translation()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pose constructor rejects non-rotations") {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  R(0, 1) = 1e-3;
  CHECK_THROWS_AS(Pose(R, Eigen::Vector3d::Zero()), DataError);

  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1.0;
  CHECK_THROWS_AS(Pose(reflection, Eigen::Vector3d::Zero()), DataError);
}

TEST_CASE("pose algebra: composition, inverse, point action") {
  Rng rng(23);
  for (int k = 0; k < 50; ++k) {
    const Pose a = oracle::random_pose(rng);
    const Pose b = oracle::random_pose(rng);
    const Eigen::Vector3d p = oracle::gauss3(rng, 3.0);

    CHECK(((a * b) * p - a * (b * p)).norm() < 1e-12);
    CHECK((a * p - (a.rotation() * p + a.translation())).norm() == 0.0);

    const Pose ab_inv = (a * b).inverse();
    const Pose binv_ainv = b.inverse() * a.inverse();
    CHECK((ab_inv.rotation() - binv_ainv.rotation()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((ab_inv.translation() - binv_ainv.translation()).cwiseAbs().maxCoeff() < 1e-12);

    const Pose round = a.inverse() * a;
    CHECK((round.rotation() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(round.translation().norm() < 1e-13);
  }
}

TEST_CASE("long composition chains stay on the rotation manifold") {
  Rng rng(29);
  Pose chain;
  for (int k = 0; k < 5000; ++k)
    chain = chain * se3_exp(Twist(oracle::gauss3(rng, 0.02), oracle::gauss3(rng, 0.1)));
  CHECK(chain.orthonormality_error() < 1e-10);
}

TEST_CASE("twist packs and unpacks the 6-vector") {
  const Twist x(Eigen::Vector3d(1.0, 2.0, 3.0), Eigen::Vector3d(4.0, 5.0, 6.0));
  const Twist y(x.vector());
  CHECK((y.omega - x.omega).norm() == 0.0);
  CHECK((y.v - x.v).norm() == 0.0);
  CHECK(x.vector()(0) == 1.0);
  CHECK(x.vector()(3) == 4.0);
}

TEST_CASE("projection gradient matches finite differences") {
  Rng rng(31);
  for (int k = 0; k < 10; ++k) {
    const int n = 6;
    PointCloud3 pts(3, n);
    for (int i = 0; i < n; ++i) {
      const double z = rng.uniform(2.0, 20.0);
      pts.col(i) = Eigen::Vector3d(rng.uniform(-1.0, 1.0) * z, rng.uniform(-0.7, 0.7) * z, z);
    }
    const Pixels grad_px = oracle::gauss(rng, 2, n);
    const PointCloud3 analytic = project_backward(pts, kK, grad_px);
    const PointCloud3 dir = oracle::gauss(rng, 3, n, 0.01);
    const double a = (analytic.array() * dir.array()).sum();
    const double fd = oracle::central_diff(
        [&](double e) {
          const Projection p = project(pts + e * dir, kK);
          return (p.pixels.array() * grad_px.array()).sum();
        },
        1e-6);
    CHECK(oracle::rel_error(a, fd) < 1e-6);
  }
}

TEST_CASE("unprojection gradient matches finite differences") {
  Rng rng(37);
  for (int k = 0; k < 10; ++k) {
    const int n = 6;
    Pixels px = oracle::gauss(rng, 2, n, 100.0);
    Eigen::VectorXd depths(n);
    for (int i = 0; i < n; ++i) depths(i) = rng.uniform(1.0, 20.0);
    const PointCloud3 grad_pts = oracle::gauss(rng, 3, n);

    const UnprojectGrad analytic = unproject_backward(px, depths, kK, grad_pts);
    const Pixels d_px = oracle::gauss(rng, 2, n);
    const Eigen::VectorXd d_depth = oracle::gauss(rng, n, 1, 0.1);
    const double a = (analytic.pixels.array() * d_px.array()).sum() +
                     analytic.depths.dot(d_depth);
    const double fd = oracle::central_diff(
        [&](double e) {
          const PointCloud3 p = unproject(px + e * d_px, depths + e * d_depth, kK);
          return (p.array() * grad_pts.array()).sum();
        },
        1e-6);
    CHECK(oracle::rel_error(a, fd) < 1e-6);
  }
}

TEST_CASE("rigid transform adjoint matches finite differences on points") {
  Rng rng(41);
  for (int k = 0; k < 10; ++k) {
    const int n = 8;
    const Pose X = oracle::random_pose(rng);
    const PointCloud3 pts = oracle::gauss(rng, 3, n, 2.0);
    const PointCloud3 grad_out = oracle::gauss(rng, 3, n);

    const TransformGrad analytic = transform_backward(X, pts, grad_out);
    const PointCloud3 dir = oracle::gauss(rng, 3, n);
    const double a = (analytic.points.array() * dir.array()).sum();
    const double fd = oracle::central_diff(
        [&](double e) {
          return (transform(X, pts + e * dir).array() * grad_out.array()).sum();
        },
        1e-6);
    CHECK(oracle::rel_error(a, fd) < 1e-7);

    // Translation gradient is the column sum of the upstream gradient.
    CHECK((analytic.translation - grad_out.rowwise().sum()).norm() < 1e-12);
    // Rotation gradient: d(sum g .* (R p + t))/dR = g p^T.
    CHECK((analytic.rotation - grad_out * pts.transpose()).norm() < 1e-12);
  }
}
