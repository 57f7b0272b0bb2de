#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dak/errors.hpp"
#include "dak/matching.hpp"
#include "dak/random.hpp"
#include "oracles.hpp"

using namespace dak;

namespace {

KeypointFrame frame_with_descriptors(const Eigen::MatrixXd& desc) {
  KeypointFrame f;
  const int n = static_cast<int>(desc.cols());
  f.descriptors = desc;
  f.positions = Pixels::Zero(2, n);
  for (int i = 0; i < n; ++i) f.positions(0, i) = 10.0 * i;
  f.scores = Eigen::VectorXd::Constant(n, 0.5);
  f.width = 640;
  f.height = 480;
  return f;
}

}  // namespace

TEST_CASE("identical descriptor sets match index to index") {
  Rng rng(101);
  const KeypointFrame a = oracle::random_frame(rng, 30, 8, 640, 480);
  const CorrespondenceSet m = reciprocal_match(a, a);
  REQUIRE(m.size() == 30);
  for (int i = 0; i < 30; ++i) {
    CHECK(m.pairs[i].first == i);
    CHECK(m.pairs[i].second == i);
  }
}

TEST_CASE("one-sided nearest neighbors are rejected") {
  // Context descriptor 0 is the nearest neighbor of both targets, but its
  // own nearest target is 0, so target 1 must stay unmatched.
  Eigen::MatrixXd ta(2, 2), ca(2, 2);
  ta.col(0) = Eigen::Vector2d(0.0, 0.0);
  ta.col(1) = Eigen::Vector2d(0.3, 0.0);
  ca.col(0) = Eigen::Vector2d(0.1, 0.0);
  ca.col(1) = Eigen::Vector2d(5.0, 0.0);
  const CorrespondenceSet m =
      reciprocal_match(frame_with_descriptors(ta), frame_with_descriptors(ca));
  REQUIRE(m.size() == 1);
  CHECK(m.pairs[0] == std::pair<int, int>(0, 0));
}

TEST_CASE("distance ties resolve to the lowest index") {
  // Two identical context descriptors equidistant from the target: index 0
  // must win, and then the reciprocal check must also pick target 0.
  Eigen::MatrixXd ta(2, 1), ca(2, 2);
  ta.col(0) = Eigen::Vector2d(0.0, 0.0);
  ca.col(0) = Eigen::Vector2d(1.0, 0.0);
  ca.col(1) = Eigen::Vector2d(1.0, 0.0);
  const CorrespondenceSet m =
      reciprocal_match(frame_with_descriptors(ta), frame_with_descriptors(ca));
  REQUIRE(m.size() == 1);
  CHECK(m.pairs[0] == std::pair<int, int>(0, 0));

  // Symmetric tie on the target side.
  Eigen::MatrixXd tb(2, 2), cb(2, 1);
  tb.col(0) = Eigen::Vector2d(2.0, 0.0);
  tb.col(1) = Eigen::Vector2d(2.0, 0.0);
  cb.col(0) = Eigen::Vector2d(2.0, 0.5);
  const CorrespondenceSet m2 =
      reciprocal_match(frame_with_descriptors(tb), frame_with_descriptors(cb));
  REQUIRE(m2.size() == 1);
  CHECK(m2.pairs[0] == std::pair<int, int>(0, 0));
}

TEST_CASE("max_distance keeps pairs at the cutoff and drops pairs above it") {
  Eigen::MatrixXd ta(2, 1), ca(2, 1);
  ta.col(0) = Eigen::Vector2d(0.0, 0.0);
  ca.col(0) = Eigen::Vector2d(2.0, 0.0);
  const KeypointFrame t = frame_with_descriptors(ta);
  const KeypointFrame c = frame_with_descriptors(ca);

  CHECK(reciprocal_match(t, c, 2.0).size() == 1);        // exactly at the cutoff
  CHECK(reciprocal_match(t, c, 1.999999).size() == 0);   // just above
  CHECK(reciprocal_match(t, c).size() == 1);             // no cutoff
}

TEST_CASE("matching agrees with a brute-force oracle on random frames") {
  Rng rng(113);
  for (int trial = 0; trial < 25; ++trial) {
    const int na = 1 + rng.uniform_int(60);
    const int nb = 1 + rng.uniform_int(60);
    const int d = 2 + rng.uniform_int(6);
    const KeypointFrame a = oracle::random_frame(rng, na, d, 640, 480);
    const KeypointFrame b = oracle::random_frame(rng, nb, d, 640, 480);
    const double cutoff = (trial % 3 == 0) ? rng.uniform(0.5, 1.5)
                                           : std::numeric_limits<double>::infinity();
    const CorrespondenceSet got = reciprocal_match(a, b, cutoff);
    const auto want = oracle::mutual_matches_brute(a, b, cutoff);
    REQUIRE(got.pairs.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) CHECK(got.pairs[i] == want[i]);
  }
}

TEST_CASE("empty frames produce empty match sets") {
  Rng rng(127);
  const KeypointFrame a = oracle::random_frame(rng, 5, 4, 640, 480);
  KeypointFrame empty;
  empty.positions = Pixels(2, 0);
  empty.descriptors = Eigen::MatrixXd(4, 0);
  empty.scores = Eigen::VectorXd(0);
  empty.width = 640;
  empty.height = 480;
  CHECK(reciprocal_match(a, empty).size() == 0);
  CHECK(reciprocal_match(empty, a).size() == 0);
}

TEST_CASE("hardest negative picks the closest admissible candidate") {
  KeypointFrame anchors;
  anchors.descriptors = Eigen::MatrixXd(2, 1);
  anchors.descriptors.col(0) = Eigen::Vector2d(0.0, 0.0);
  anchors.positions = Pixels::Zero(2, 1);
  anchors.scores = Eigen::VectorXd::Constant(1, 0.5);
  anchors.width = 640;
  anchors.height = 480;

  KeypointFrame cand;
  cand.descriptors = Eigen::MatrixXd(2, 4);
  cand.descriptors.col(0) = Eigen::Vector2d(0.1, 0.0);   // the positive
  cand.descriptors.col(1) = Eigen::Vector2d(0.2, 0.0);   // nearest, but inside the safe radius
  cand.descriptors.col(2) = Eigen::Vector2d(0.5, 0.0);   // admissible hardest negative
  cand.descriptors.col(3) = Eigen::Vector2d(3.0, 0.0);
  cand.positions = Pixels(2, 4);
  cand.positions.col(0) = Eigen::Vector2d(100.0, 100.0);
  cand.positions.col(1) = Eigen::Vector2d(103.0, 100.0);  // 3 px from the positive
  cand.positions.col(2) = Eigen::Vector2d(200.0, 200.0);
  cand.positions.col(3) = Eigen::Vector2d(300.0, 300.0);
  cand.scores = Eigen::VectorXd::Constant(4, 0.5);
  cand.width = 640;
  cand.height = 480;

  const auto neg = hardest_negative(anchors, 0, cand, 0);
  REQUIRE(neg.has_value());
  CHECK(*neg == 2);

  // Exactly at the safe radius is still excluded.
  cand.positions.col(1) = Eigen::Vector2d(104.0, 100.0);
  CHECK(*hardest_negative(anchors, 0, cand, 0) == 2);
  // Just outside the radius becomes admissible again.
  cand.positions.col(1) = Eigen::Vector2d(104.001, 100.0);
  CHECK(*hardest_negative(anchors, 0, cand, 0) == 1);
}

TEST_CASE("hardest negative returns nullopt when exclusions empty the pool") {
  Rng rng(131);
  const KeypointFrame anchors = oracle::random_frame(rng, 1, 4, 640, 480);

  KeypointFrame cand = oracle::random_frame(rng, 3, 4, 640, 480);
  // Park every candidate on the positive's pixel: all are inside the radius.
  for (int i = 0; i < 3; ++i) cand.positions.col(i) = Eigen::Vector2d(50.0, 50.0);
  CHECK_FALSE(hardest_negative(anchors, 0, cand, 0).has_value());

  // A single candidate that is itself the positive.
  KeypointFrame one = oracle::random_frame(rng, 1, 4, 640, 480);
  CHECK_FALSE(hardest_negative(anchors, 0, one, 0).has_value());
}

TEST_CASE("frame validation rejects inconsistent fields") {
  Rng rng(137);
  KeypointFrame good = oracle::random_frame(rng, 5, 4, 640, 480);
  CHECK_NOTHROW(good.validate());

  KeypointFrame f = good;
  f.scores = Eigen::VectorXd::Constant(4, 0.5);  // wrong length
  CHECK_THROWS_AS(f.validate(), DataError);

  f = good;
  f.descriptors = Eigen::MatrixXd::Zero(4, 6);  // wrong count
  CHECK_THROWS_AS(f.validate(), DataError);

  f = good;
  f.scores(2) = 1.5;  // out of [0, 1]
  CHECK_THROWS_AS(f.validate(), DataError);
  f.scores(2) = -0.1;
  CHECK_THROWS_AS(f.validate(), DataError);

  f = good;
  f.positions(0, 1) = 640.0;  // == width is out of bounds
  CHECK_THROWS_AS(f.validate(), DataError);
  f.positions(0, 1) = -0.5;
  CHECK_THROWS_AS(f.validate(), DataError);

  f = good;
  f.positions(0, 1) = std::nan("");
  CHECK_THROWS_AS(f.validate(), DataError);

  f = good;
  f.depths = Eigen::VectorXd::Constant(5, 2.0);
  CHECK_NOTHROW(f.validate());
  f.depths(3) = 0.0;  // depths must be positive when present
  CHECK_THROWS_AS(f.validate(), DataError);
  f.depths = Eigen::VectorXd::Constant(3, 2.0);  // wrong length
  CHECK_THROWS_AS(f.validate(), DataError);
}

TEST_CASE("correspondence inlier bookkeeping") {
  CorrespondenceSet s;
  s.pairs = {{0, 0}, {1, 2}, {2, 1}};
  CHECK(s.inlier_count() == 0);  // empty mask means no inlier information
  s.inlier_mask = {1, 0, 1};
  CHECK(s.inlier_count() == 2);
}
