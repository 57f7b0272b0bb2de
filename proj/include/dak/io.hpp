#pragma once

#include <cstdint>
#include <string>

#include "dak/evaluation.hpp"
#include "dak/image.hpp"
#include "dak/losses.hpp"
#include "dak/matching.hpp"
#include "dak/pose_estimation.hpp"

namespace dak {

// ---- feature files ----------------------------------------------------------
// Binary container for one frame's keypoints. Layout (all little-endian):
//   magic "DAKF" | version u16 | width u32 | height u32 | N u32 | D u32
// followed by float32 blocks: positions (u,v interleaved, 2N), scores (N),
// depths (N, all-zero block = depths absent), descriptors (column-major, DN).
// write(read(f)) reproduces f byte for byte.
KeypointFrame read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const KeypointFrame& frame);

// ---- depth maps (PFM) -------------------------------------------------------
// Grayscale portable float map: "Pf", width height, scale -1.0 (little
// endian), float32 rows stored bottom-to-top. The scale magnitude is
// ignored on read; a positive scale (big-endian payload) is byte-swapped.
DepthMap read_pfm(const std::string& path);
void write_pfm(const std::string& path, const DepthMap& depth);

// ---- trajectories -----------------------------------------------------------
// Text, one line per frame: 12 floats, the row-major 3x4 [R|t] mapping
// camera to world. Rotations orthonormal within 1e-4 are silently repaired
// (counted via `n_renormalized`); anything worse is a data error. Values
// are written with 17 significant digits, so a round-trip is exact.
Trajectory read_pose_file(const std::string& path, int* n_renormalized = nullptr);
void write_pose_file(const std::string& path, const Trajectory& trajectory);

// ---- run configuration ------------------------------------------------------
// All tunables of the pipeline in one place. Serialized as line-oriented
// `key=value` text; unknown keys are rejected so typos fail loudly.
struct RunConfig {
  CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5};
  RansacConfig ransac;
  LossWeights weights;
  KeypointMetricConfig metrics;
  double match_max_distance = 1e307;  // descriptor distance cutoff, effectively off
  std::uint64_t seed = 0;

  // Applies one key=value assignment; unknown key or bad value throws.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig read_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& config);
void write_run_config(const std::string& path, const RunConfig& config);

// Writes via a temp file in the same directory plus an atomic rename, so
// readers never observe a half-written file.
void atomic_write_bytes(const std::string& path, const std::string& bytes);
std::string read_bytes(const std::string& path);

}  // namespace dak
