#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dak/evaluation.hpp"
#include "dak/io.hpp"
#include "dak/matching.hpp"

namespace dak {

struct VoFrameDiagnostics {
  int frame = 0;  // index of the later frame of the pair
  int n_matches = 0;
  int n_inliers = 0;
  double residual_rms_px = 0.0;
  bool fallback = false;  // estimation failed, identity motion substituted
};

struct VoResult {
  Trajectory trajectory;  // camera-to-world, anchored at the identity
  std::vector<VoFrameDiagnostics> diagnostics;  // one entry per frame pair
};

// Frame-to-frame visual odometry: chains the two-frame relative pose over
// consecutive frames. A failed pair degrades to flagged identity motion so
// the output stays aligned with ground truth. Deterministic given config.
VoResult run_vo(const std::vector<KeypointFrame>& frames, const RunConfig& config);

// Feature files of a sequence directory, sorted by filename. Throws when
// the directory holds fewer than two.
std::vector<std::string> list_feature_files(const std::string& dir);

struct GradCheckRow {
  std::string name;
  double max_rel_error = 0.0;  // worst instance, |analytic - fd| relative
  bool pass = false;           // max_rel_error < 1e-4
};

// Verifies every analytic gradient in the library against central finite
// differences on randomized instances (10 per row).
std::vector<GradCheckRow> run_gradcheck(std::uint64_t seed);

}  // namespace dak
