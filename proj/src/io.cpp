#include "dak/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "dak/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need swapped codecs");

namespace dak {
namespace {

constexpr std::uint16_t kFeatureVersion = 1;
constexpr char kFeatureMagic[4] = {'D', 'A', 'K', 'F'};

void append_u16(std::string& out, std::uint16_t v) {
  out.append(reinterpret_cast<const char*>(&v), 2);
}
void append_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}
void append_f32(std::string& out, float v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}

// Byte-offset-aware reader over an in-memory file image.
class Cursor {
 public:
  Cursor(const std::string& bytes, std::string name)
      : bytes_(bytes), name_(std::move(name)) {}

  std::size_t offset() const { return offset_; }

  void require(std::size_t n, const char* what) {
    if (offset_ + n > bytes_.size())
      throw DataError(name_ + ": truncated at byte " + std::to_string(bytes_.size()) +
                      " while reading " + what + " at offset " + std::to_string(offset_));
  }
  std::uint16_t u16(const char* what) {
    require(2, what);
    std::uint16_t v;
    std::memcpy(&v, bytes_.data() + offset_, 2);
    offset_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + offset_, 4);
    offset_ += 4;
    return v;
  }
  float f32(const char* what) {
    return std::bit_cast<float>(u32(what));
  }
  void raw(char* dst, std::size_t n, const char* what) {
    require(n, what);
    std::memcpy(dst, bytes_.data() + offset_, n);
    offset_ += n;
  }
  bool at_end() const { return offset_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string name_;
  std::size_t offset_ = 0;
};

float checked_f32(double v, const char* what) {
  const float f = static_cast<float>(v);
  if (!std::isfinite(f))
    throw DataError(std::string("write: non-finite ") + what + " value");
  return f;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw DataError("config: bad numeric value for " + key + ": '" + value + "'");
  }
  if (used != value.size() || !std::isfinite(v))
    throw DataError("config: bad numeric value for " + key + ": '" + value + "'");
  return v;
}

long to_long(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  const long n = static_cast<long>(v);
  if (static_cast<double>(n) != v)
    throw DataError("config: " + key + " must be an integer, got '" + value + "'");
  return n;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void format_double(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

KeypointFrame read_feature_file(const std::string& path) {
  const std::string bytes = read_bytes(path);
  Cursor in(bytes, path);

  char magic[4];
  in.raw(magic, 4, "magic");
  if (std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw DataError(path + ": bad magic, not a feature file");
  const std::uint16_t version = in.u16("version");
  if (version != kFeatureVersion)
    throw DataError(path + ": unsupported feature file version " + std::to_string(version));

  const std::uint32_t width = in.u32("width");
  const std::uint32_t height = in.u32("height");
  const std::uint32_t n = in.u32("point count");
  const std::uint32_t d = in.u32("descriptor size");

  const std::size_t expected =
      22 + 4 * (2 * static_cast<std::size_t>(n) + 2 * static_cast<std::size_t>(n) +
                static_cast<std::size_t>(d) * n);
  if (bytes.size() != expected)
    throw DataError(path + ": expected " + std::to_string(expected) + " bytes for N=" +
                    std::to_string(n) + " D=" + std::to_string(d) + ", file has " +
                    std::to_string(bytes.size()));

  KeypointFrame frame;
  frame.width = static_cast<int>(width);
  frame.height = static_cast<int>(height);
  frame.positions.resize(2, n);
  frame.scores.resize(n);
  frame.depths.resize(n);
  frame.descriptors.resize(d, n);

  for (std::uint32_t i = 0; i < n; ++i) {
    frame.positions(0, i) = in.f32("position");
    frame.positions(1, i) = in.f32("position");
  }
  for (std::uint32_t i = 0; i < n; ++i) frame.scores(i) = in.f32("score");
  bool any_depth = false;
  for (std::uint32_t i = 0; i < n; ++i) {
    frame.depths(i) = in.f32("depth");
    if (frame.depths(i) != 0.0) any_depth = true;
  }
  if (!any_depth) frame.depths.resize(0);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t c = 0; c < d; ++c) frame.descriptors(c, i) = in.f32("descriptor");

  frame.validate();
  return frame;
}

void write_feature_file(const std::string& path, const KeypointFrame& frame) {
  frame.validate();
  const int n = frame.size();
  const int d = static_cast<int>(frame.descriptors.rows());

  std::string out;
  out.reserve(22 + 4 * static_cast<std::size_t>(n) * (4 + d));
  out.append(kFeatureMagic, 4);
  append_u16(out, kFeatureVersion);
  append_u32(out, static_cast<std::uint32_t>(frame.width));
  append_u32(out, static_cast<std::uint32_t>(frame.height));
  append_u32(out, static_cast<std::uint32_t>(n));
  append_u32(out, static_cast<std::uint32_t>(d));

  // float32 rounding may nudge a position up to the image bound; clamp in
  // float space so the file still satisfies the in-bounds contract.
  const float u_max = frame.width > 0
                          ? std::nextafter(static_cast<float>(frame.width), 0.0f)
                          : std::numeric_limits<float>::max();
  const float v_max = frame.height > 0
                          ? std::nextafter(static_cast<float>(frame.height), 0.0f)
                          : std::numeric_limits<float>::max();
  for (int i = 0; i < n; ++i) {
    append_f32(out, std::min(checked_f32(frame.positions(0, i), "position"), u_max));
    append_f32(out, std::min(checked_f32(frame.positions(1, i), "position"), v_max));
  }
  for (int i = 0; i < n; ++i) append_f32(out, checked_f32(frame.scores(i), "score"));
  for (int i = 0; i < n; ++i)
    append_f32(out, frame.has_depths() ? checked_f32(frame.depths(i), "depth") : 0.0f);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      append_f32(out, checked_f32(frame.descriptors(c, i), "descriptor"));

  atomic_write_bytes(path, out);
}

DepthMap read_pfm(const std::string& path) {
  const std::string bytes = read_bytes(path);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw DataError(path + ": truncated PFM header at byte " +
                                      std::to_string(pos));
    return bytes.substr(start, pos - start);
  };

  const std::string magic = next_token();
  if (magic == "PF") throw DataError(path + ": color PFM not supported, expected grayscale 'Pf'");
  if (magic != "Pf") throw DataError(path + ": not a PFM file");
  const long width = to_long("pfm width", next_token());
  const long height = to_long("pfm height", next_token());
  if (width < 1 || height < 1) throw DataError(path + ": bad PFM dimensions");
  const double scale = to_double("pfm scale", next_token());
  if (scale == 0.0) throw DataError(path + ": PFM scale must be non-zero");
  if (pos >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw DataError(path + ": missing whitespace after PFM header");
  ++pos;  // exactly one whitespace byte separates header and raster

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() - pos != count * 4)
    throw DataError(path + ": expected " + std::to_string(count * 4) +
                    " raster bytes, found " + std::to_string(bytes.size() - pos) +
                    " at offset " + std::to_string(pos));

  DepthMap depth(static_cast<int>(height), static_cast<int>(width));
  // PFM stores rows bottom-to-top. A positive scale flags big-endian data.
  const bool swap = scale > 0.0;
  for (long row = height - 1; row >= 0; --row) {
    for (long col = 0; col < width; ++col) {
      std::uint32_t u;
      std::memcpy(&u, bytes.data() + pos, 4);
      pos += 4;
      if (swap) u = __builtin_bswap32(u);
      depth.at(static_cast<int>(row), static_cast<int>(col)) = std::bit_cast<float>(u);
    }
  }
  depth.validate();
  return depth;
}

void write_pfm(const std::string& path, const DepthMap& depth) {
  depth.validate();
  std::string out = "Pf\n" + std::to_string(depth.width) + " " +
                    std::to_string(depth.height) + "\n-1.0\n";
  out.reserve(out.size() + 4 * depth.data.size());
  for (int row = depth.height - 1; row >= 0; --row)
    for (int col = 0; col < depth.width; ++col)
      append_f32(out, checked_f32(depth.at(row, col), "depth"));
  atomic_write_bytes(path, out);
}

Trajectory read_pose_file(const std::string& path, int* n_renormalized) {
  std::istringstream in(read_bytes(path));
  Trajectory traj;
  int repaired = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    double v[12];
    for (int i = 0; i < 12; ++i) {
      if (!(ls >> v[i]))
        throw DataError(path + ": line " + std::to_string(line_no) +
                        ": expected 12 numbers per pose");
    }
    std::string extra;
    if (ls >> extra)
      throw DataError(path + ": line " + std::to_string(line_no) + ": trailing content '" +
                      extra + "'");

    Eigen::Matrix3d R;
    Eigen::Vector3d t;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) R(r, c) = v[4 * r + c];
      t(r) = v[4 * r + 3];
    }
    if (!R.allFinite() || !t.allFinite())
      throw DataError(path + ": line " + std::to_string(line_no) + ": non-finite pose");

    const double err = (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
    if (err > 1e-4)
      throw DataError(path + ": line " + std::to_string(line_no) +
                      ": rotation is not orthonormal (error " + std::to_string(err) + ")");
    if (err > 1e-9) {
      Eigen::JacobiSVD<Eigen::Matrix3d> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::Matrix3d fixed = svd.matrixU() * svd.matrixV().transpose();
      if (fixed.determinant() < 0.0) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(2, 2) = -1.0;
        fixed = svd.matrixU() * flip * svd.matrixV().transpose();
      }
      R = fixed;
      ++repaired;
      std::cerr << "warning: " << path << ": line " << line_no
                << ": re-orthonormalized rotation (error " << err << ")\n";
    }
    traj.poses.emplace_back(R, t);
  }
  if (traj.poses.empty()) throw DataError(path + ": no poses found");
  if (n_renormalized) *n_renormalized = repaired;
  return traj;
}

void write_pose_file(const std::string& path, const Trajectory& trajectory) {
  if (trajectory.poses.empty()) throw DataError("write_pose_file: empty trajectory");
  std::string out;
  for (const Pose& pose : trajectory.poses) {
    const Eigen::Matrix3d& R = pose.rotation();
    const Eigen::Vector3d& t = pose.translation();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        format_double(out, R(r, c));
        out += ' ';
      }
      format_double(out, t(r));
      out += r < 2 ? ' ' : '\n';
    }
  }
  atomic_write_bytes(path, out);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "fx") intrinsics.fx = to_double(key, value);
  else if (key == "fy") intrinsics.fy = to_double(key, value);
  else if (key == "cx") intrinsics.cx = to_double(key, value);
  else if (key == "cy") intrinsics.cy = to_double(key, value);
  else if (key == "ransac_iters") ransac.max_iterations = static_cast<int>(to_long(key, value));
  else if (key == "ransac_thresh") ransac.inlier_threshold_px = to_double(key, value);
  else if (key == "ransac_confidence") ransac.confidence = to_double(key, value);
  else if (key == "ransac_min_sample") ransac.min_sample = static_cast<int>(to_long(key, value));
  else if (key == "alpha") weights.alpha = to_double(key, value);
  else if (key == "beta1") weights.beta1 = to_double(key, value);
  else if (key == "beta2") weights.beta2 = to_double(key, value);
  else if (key == "beta3") weights.beta3 = to_double(key, value);
  else if (key == "beta4") weights.beta4 = to_double(key, value);
  else if (key == "gamma") weights.gamma = to_double(key, value);
  else if (key == "margin") weights.margin = to_double(key, value);
  else if (key == "kp_threshold") metrics.distance_threshold_px = to_double(key, value);
  else if (key == "kp_top_n")
    metrics.n_keypoints_homography = static_cast<int>(to_long(key, value));
  else if (key == "kp_ransac_iters")
    metrics.homography_ransac_iters = static_cast<int>(to_long(key, value));
  else if (key == "kp_ransac_thresh") metrics.homography_threshold_px = to_double(key, value);
  else if (key == "match_max_distance") match_max_distance = to_double(key, value);
  else if (key == "seed") {
    const long s = to_long(key, value);
    if (s < 0) throw DataError("config: seed must be non-negative");
    seed = static_cast<std::uint64_t>(s);
    ransac.seed = seed;
    metrics.seed = seed;
  } else {
    throw DataError("config: unknown key '" + key + "'");
  }
}

void RunConfig::validate() const {
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0))
    throw DataError("config: focal lengths must be positive");
  ransac.validate();
  weights.validate();
  metrics.validate();
  if (!(match_max_distance > 0.0)) throw DataError("config: match_max_distance must be positive");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config: line " + std::to_string(line_no) + ": expected key=value, got '" +
                      line + "'");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

RunConfig read_run_config(const std::string& path) {
  try {
    return parse_run_config(read_bytes(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string serialize_run_config(const RunConfig& config) {
  std::string out;
  auto emit = [&out](const char* key, double v) {
    out += key;
    out += '=';
    format_double(out, v);
    out += '\n';
  };
  emit("fx", config.intrinsics.fx);
  emit("fy", config.intrinsics.fy);
  emit("cx", config.intrinsics.cx);
  emit("cy", config.intrinsics.cy);
  emit("ransac_iters", config.ransac.max_iterations);
  emit("ransac_thresh", config.ransac.inlier_threshold_px);
  emit("ransac_confidence", config.ransac.confidence);
  emit("ransac_min_sample", config.ransac.min_sample);
  emit("alpha", config.weights.alpha);
  emit("beta1", config.weights.beta1);
  emit("beta2", config.weights.beta2);
  emit("beta3", config.weights.beta3);
  emit("beta4", config.weights.beta4);
  emit("gamma", config.weights.gamma);
  emit("margin", config.weights.margin);
  emit("kp_threshold", config.metrics.distance_threshold_px);
  emit("kp_top_n", config.metrics.n_keypoints_homography);
  emit("kp_ransac_iters", config.metrics.homography_ransac_iters);
  emit("kp_ransac_thresh", config.metrics.homography_threshold_px);
  emit("match_max_distance", config.match_max_distance);
  out += "seed=" + std::to_string(config.seed) + "\n";
  return out;
}

void write_run_config(const std::string& path, const RunConfig& config) {
  atomic_write_bytes(path, serialize_run_config(config));
}

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DataError("read failed for " + path);
  return buf.str();
}

}  // namespace dak
