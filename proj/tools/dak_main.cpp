// Command-line surface of the pipeline: visual odometry over feature-file
// sequences, trajectory and keypoint evaluation, synthetic data generation,
// and the gradient verification suite. All randomness flows from --seed, so
// identical invocations produce identical bytes.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dak/errors.hpp"
#include "dak/evaluation.hpp"
#include "dak/io.hpp"
#include "dak/pipeline.hpp"
#include "dak/synth.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEstimation = 3;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Common tunables; every flag overrides the corresponding config-file key.
struct CommonOpts {
  std::string config_path;
  std::vector<double> intrinsics;
  int ransac_iters = 0;
  double ransac_thresh = 0.0;
  std::uint64_t seed = 0;

  CLI::Option* config_opt = nullptr;
  CLI::Option* intrinsics_opt = nullptr;
  CLI::Option* iters_opt = nullptr;
  CLI::Option* thresh_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    config_opt = cmd->add_option("--config", config_path,
                                 "key=value config file (see README for keys)");
    intrinsics_opt = cmd->add_option("--intrinsics", intrinsics,
                                     "camera intrinsics fx,fy,cx,cy")
                         ->delimiter(',')
                         ->expected(4);
    iters_opt = cmd->add_option("--ransac-iters", ransac_iters, "RANSAC iteration cap");
    thresh_opt = cmd->add_option("--ransac-thresh", ransac_thresh,
                                 "RANSAC inlier threshold (px)");
    seed_opt = cmd->add_option("--seed", seed, "random seed");
  }

  // Precedence: defaults < config file (explicit or per-sequence) < flags.
  dak::RunConfig resolve(const std::string& fallback_config = "") const {
    dak::RunConfig cfg;
    if (*config_opt) {
      cfg = dak::read_run_config(config_path);
    } else if (!fallback_config.empty() && fs::exists(fallback_config)) {
      cfg = dak::read_run_config(fallback_config);
    }
    if (*intrinsics_opt) {
      cfg.intrinsics = dak::CameraIntrinsics(intrinsics[0], intrinsics[1], intrinsics[2],
                                             intrinsics[3]);
    }
    if (*iters_opt) cfg.ransac.max_iterations = ransac_iters;
    if (*thresh_opt) cfg.ransac.inlier_threshold_px = ransac_thresh;
    if (*seed_opt) {
      cfg.seed = seed;
      cfg.ransac.seed = seed;
      cfg.metrics.seed = seed;
    }
    cfg.validate();
    return cfg;
  }
};

void emit_report(const std::string& report, const std::string& output_path) {
  std::cout << report;
  if (!output_path.empty()) dak::atomic_write_bytes(output_path, report);
}

Eigen::Matrix3d read_homography_file(const std::string& path) {
  std::istringstream in(dak::read_bytes(path));
  Eigen::Matrix3d H;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (!(in >> H(r, c)))
        throw dak::DataError(path + ": expected 9 numbers (row-major 3x3 homography)");
  std::string extra;
  if (in >> extra) throw dak::DataError(path + ": trailing content '" + extra + "'");
  if (!H.allFinite()) throw dak::DataError(path + ": non-finite homography");
  return H;
}

int cmd_vo(const CommonOpts& common, const std::string& dir, const std::string& output,
           const std::string& diagnostics_path) {
  const auto paths = dak::list_feature_files(dir);
  const dak::RunConfig cfg = common.resolve((fs::path(dir) / "config.cfg").string());

  std::vector<dak::KeypointFrame> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(dak::read_feature_file(p));

  const dak::VoResult result = dak::run_vo(frames, cfg);

  const std::string out_path =
      output.empty() ? (fs::path(dir) / "estimated_poses.txt").string() : output;
  dak::write_pose_file(out_path, result.trajectory);

  std::string report;
  report += "frames=" + std::to_string(frames.size()) + "\n";
  int fallbacks = 0;
  for (const auto& d : result.diagnostics) {
    report += "frame=" + std::to_string(d.frame) + " matches=" + std::to_string(d.n_matches) +
              " inliers=" + std::to_string(d.n_inliers) +
              " residual_rms_px=" + fmt(d.residual_rms_px) +
              " fallback=" + (d.fallback ? "1" : "0") + "\n";
    fallbacks += d.fallback ? 1 : 0;
  }
  report += "fallbacks=" + std::to_string(fallbacks) + "\n";
  report += "poses_written=" + out_path + "\n";
  emit_report(report, diagnostics_path);
  return kExitOk;
}

int cmd_eval_traj(const std::string& est_path, const std::string& gt_path,
                  const std::string& output) {
  const dak::Trajectory est = dak::read_pose_file(est_path);
  const dak::Trajectory gt = dak::read_pose_file(gt_path);
  if (est.size() != gt.size())
    throw dak::DataError("eval-traj: trajectory lengths differ (" + std::to_string(est.size()) +
                         " vs " + std::to_string(gt.size()) + ")");

  const dak::Sim3 S = dak::umeyama_sim3(est, gt);
  const dak::DriftMetrics aligned = dak::kitti_drift(dak::apply_sim3(S, est), gt);
  const dak::DriftMetrics raw = dak::kitti_drift(est, gt);

  std::string report;
  report += "frames=" + std::to_string(est.size()) + "\n";
  report += "sim3_scale=" + fmt(S.scale) + "\n";
  report += "t_rel_percent=" + fmt(aligned.t_rel_percent) + "\n";
  report += "r_rel_deg_per_100m=" + fmt(aligned.r_rel_deg_per_100m) + "\n";
  report += "n_segments=" + std::to_string(aligned.n_segments) + "\n";
  report += "raw_t_rel_percent=" + fmt(raw.t_rel_percent) + "\n";
  report += "raw_r_rel_deg_per_100m=" + fmt(raw.r_rel_deg_per_100m) + "\n";
  emit_report(report, output);
  return kExitOk;
}

int cmd_eval_kp(const CommonOpts& common, const std::string& a_path, const std::string& b_path,
                const std::string& h_path, const std::string& output) {
  const dak::RunConfig cfg = common.resolve();
  const dak::KeypointFrame a = dak::read_feature_file(a_path);
  const dak::KeypointFrame b = dak::read_feature_file(b_path);
  const Eigen::Matrix3d H = read_homography_file(h_path);
  if (a.width <= 0 || a.height <= 0)
    throw dak::DataError(a_path + ": frame is missing its image size");

  const double thr = cfg.metrics.distance_threshold_px;
  dak::Pixels corners(2, 4);
  corners << 0.0, a.width - 1.0, 0.0, a.width - 1.0,
             0.0, 0.0, a.height - 1.0, a.height - 1.0;
  const std::vector<double> eps_list = {1.0, 3.0, 5.0};
  const std::vector<double> acc =
      dak::homography_accuracy(a, b, H, corners, eps_list, cfg.metrics);

  std::string report;
  report += "repeatability=" + fmt(dak::repeatability(a, b, H, thr)) + "\n";
  report += "localization_error_px=" + fmt(dak::localization_error(a, b, H, thr)) + "\n";
  report += "matching_score=" + fmt(dak::matching_score(a, b, H, thr)) + "\n";
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    report += "homography_accuracy_eps" + std::to_string(static_cast<int>(eps_list[i])) + "=" +
              fmt(acc[i]) + "\n";
  }
  emit_report(report, output);
  return kExitOk;
}

int cmd_synth(const CommonOpts& common, const std::string& out_dir, int n_frames,
              const std::string& motion_name, int n_points, double pixel_noise,
              double outlier_rate, double descriptor_noise, double depth_noise, bool planar) {
  const dak::RunConfig cfg = common.resolve();

  dak::SceneConfig scene;
  scene.n_points = n_points;
  scene.intrinsics = cfg.intrinsics;
  scene.pixel_noise_sigma = pixel_noise;
  scene.outlier_rate = outlier_rate;
  scene.descriptor_noise_sigma = descriptor_noise;
  scene.depth_noise_sigma = depth_noise;
  scene.seed = cfg.seed;

  const dak::SyntheticSequence seq =
      planar ? dak::generate_planar_scene(scene, n_frames, cfg.seed + 1)
             : dak::generate_point_scene(scene, n_frames,
                                         dak::motion_model_from_string(motion_name));

  fs::create_directories(out_dir);
  char name[32];
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    std::snprintf(name, sizeof(name), "%06zu.dakf", k);
    dak::write_feature_file((fs::path(out_dir) / name).string(), seq.frames[k].keypoints);
    if (planar) {
      std::snprintf(name, sizeof(name), "%06zu_depth.pfm", k);
      dak::write_pfm((fs::path(out_dir) / name).string(), seq.frames[k].depth);
    }
  }
  dak::write_pose_file((fs::path(out_dir) / "groundtruth.txt").string(), seq.trajectory_gt);
  dak::write_run_config((fs::path(out_dir) / "config.cfg").string(), cfg);

  std::string report;
  report += "sequence_dir=" + out_dir + "\n";
  report += "frames=" + std::to_string(seq.frames.size()) + "\n";
  report += "landmarks=" + std::to_string(seq.landmarks.cols()) + "\n";
  report += std::string("kind=") + (planar ? "planar" : motion_name) + "\n";
  report += "seed=" + std::to_string(scene.seed) + "\n";
  emit_report(report, "");
  return kExitOk;
}

int cmd_gradcheck(const CommonOpts& common, const std::string& output) {
  const dak::RunConfig cfg = common.resolve();
  const std::vector<dak::GradCheckRow> rows = dak::run_gradcheck(cfg.seed);

  std::string report;
  bool all_pass = true;
  for (const auto& row : rows) {
    report += "check=" + row.name + " max_rel_error=" + fmt(row.max_rel_error) +
              " pass=" + (row.pass ? "1" : "0") + "\n";
    all_pass = all_pass && row.pass;
  }
  report += std::string("gradcheck_pass=") + (all_pass ? "1" : "0") + "\n";
  emit_report(report, output);
  if (!all_pass) throw dak::EstimationError("gradcheck: at least one gradient check failed");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth-aware keypoint pipeline: visual odometry, evaluation, synthetic data"};
  app.require_subcommand(1);

  // vo
  auto* vo = app.add_subcommand("vo", "frame-to-frame visual odometry over a feature sequence");
  std::string vo_dir, vo_output, vo_diag;
  vo->add_option("sequence_dir", vo_dir, "directory of .dakf feature files")->required();
  vo->add_option("--output", vo_output, "estimated pose file (default <dir>/estimated_poses.txt)");
  vo->add_option("--diagnostics", vo_diag, "also write the per-frame report to this file");
  CommonOpts vo_common;
  vo_common.attach(vo);

  // eval-traj
  auto* et = app.add_subcommand("eval-traj", "drift metrics of an estimated trajectory");
  std::string et_est, et_gt, et_output;
  et->add_option("estimated", et_est, "estimated pose file")->required();
  et->add_option("groundtruth", et_gt, "ground-truth pose file")->required();
  et->add_option("--output", et_output, "write the report here as well");

  // eval-kp
  auto* ek = app.add_subcommand("eval-kp", "keypoint quality metrics under a known homography");
  std::string ek_a, ek_b, ek_h, ek_output;
  ek->add_option("features_a", ek_a, "feature file of the source frame")->required();
  ek->add_option("features_b", ek_b, "feature file of the warped frame")->required();
  ek->add_option("homography", ek_h, "text file with the 3x3 true homography")->required();
  ek->add_option("--output", ek_output, "write the report here as well");
  CommonOpts ek_common;
  ek_common.attach(ek);

  // synth
  auto* sy = app.add_subcommand("synth", "generate a synthetic feature sequence");
  std::string sy_dir, sy_motion = "forward-drive";
  int sy_frames = 100, sy_points = 600;
  double sy_pixel_noise = 0.0, sy_outliers = 0.0, sy_desc_noise = 0.0, sy_depth_noise = 0.0;
  bool sy_planar = false;
  sy->add_option("out_dir", sy_dir, "output sequence directory")->required();
  sy->add_option("--frames", sy_frames, "number of frames")->check(CLI::Range(2, 100000));
  sy->add_option("--motion", sy_motion, "random-walk | forward-drive | orbit");
  sy->add_option("--n-points", sy_points, "number of landmarks")->check(CLI::PositiveNumber);
  sy->add_option("--pixel-noise", sy_pixel_noise, "keypoint position noise sigma (px)");
  sy->add_option("--outlier-rate", sy_outliers, "fraction of corrupted keypoints");
  sy->add_option("--desc-noise", sy_desc_noise, "descriptor noise sigma");
  sy->add_option("--depth-noise", sy_depth_noise, "relative depth noise sigma");
  sy->add_flag("--planar", sy_planar, "textured-plane scene with dense PFM depth");
  CommonOpts sy_common;
  sy_common.attach(sy);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "verify analytic gradients by finite differences");
  std::string gc_output;
  gc->add_option("--output", gc_output, "write the report here as well");
  CommonOpts gc_common;
  gc_common.attach(gc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (vo->parsed()) return cmd_vo(vo_common, vo_dir, vo_output, vo_diag);
    if (et->parsed()) return cmd_eval_traj(et_est, et_gt, et_output);
    if (ek->parsed()) return cmd_eval_kp(ek_common, ek_a, ek_b, ek_h, ek_output);
    if (sy->parsed())
      return cmd_synth(sy_common, sy_dir, sy_frames, sy_motion, sy_points, sy_pixel_noise,
                       sy_outliers, sy_desc_noise, sy_depth_noise, sy_planar);
    if (gc->parsed()) return cmd_gradcheck(gc_common, gc_output);
  } catch (const dak::EstimationError& e) {
    std::cerr << "estimation error: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const dak::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
