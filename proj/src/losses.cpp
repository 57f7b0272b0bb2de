#include "dak/losses.hpp"

#include <cmath>

#include "dak/errors.hpp"

namespace dak {
namespace {

constexpr double kSsimC1 = 1e-4;
constexpr double kSsimC2 = 9e-4;

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// 3x3 box mean with replicate padding.
Eigen::ArrayXXd box3(const Eigen::ArrayXXd& f) {
  const Eigen::Index H = f.rows(), W = f.cols();
  Eigen::ArrayXXd out(H, W);
  for (Eigen::Index y = 0; y < H; ++y) {
    for (Eigen::Index x = 0; x < W; ++x) {
      double sum = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const Eigen::Index yy = std::clamp<Eigen::Index>(y + dy, 0, H - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const Eigen::Index xx = std::clamp<Eigen::Index>(x + dx, 0, W - 1);
          sum += f(yy, xx);
        }
      }
      out(y, x) = sum / 9.0;
    }
  }
  return out;
}

// Adjoint of box3: scatters each output gradient back into the (clamped)
// cells it averaged.
Eigen::ArrayXXd box3_adjoint(const Eigen::ArrayXXd& g) {
  const Eigen::Index H = g.rows(), W = g.cols();
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(H, W);
  for (Eigen::Index y = 0; y < H; ++y) {
    for (Eigen::Index x = 0; x < W; ++x) {
      const double v = g(y, x) / 9.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const Eigen::Index yy = std::clamp<Eigen::Index>(y + dy, 0, H - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const Eigen::Index xx = std::clamp<Eigen::Index>(x + dx, 0, W - 1);
          out(yy, xx) += v;
        }
      }
    }
  }
  return out;
}

Eigen::ArrayXXd channel_array(const Image& img, int c) {
  Eigen::ArrayXXd out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out(y, x) = img.at(y, x, c);
  return out;
}

struct BilinearWeights {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  double fx = 0.0, fy = 0.0;
  bool ok = false;
};

BilinearWeights bilinear_weights(double u, double v, int width, int height) {
  BilinearWeights w;
  if (!(u >= 0.0 && u <= width - 1.0 && v >= 0.0 && v <= height - 1.0)) return w;
  w.x0 = static_cast<int>(std::floor(u));
  w.y0 = static_cast<int>(std::floor(v));
  w.x0 = std::min(w.x0, width - 1);
  w.y0 = std::min(w.y0, height - 1);
  w.x1 = std::min(w.x0 + 1, width - 1);
  w.y1 = std::min(w.y0 + 1, height - 1);
  w.fx = u - w.x0;
  w.fy = v - w.y0;
  w.ok = true;
  return w;
}

// Per-channel SSIM statistics kept around for the backward pass.
struct SsimChannel {
  Eigen::ArrayXXd mux, muy, A1, A2, B1, B2, S;
};

SsimChannel ssim_channel(const Eigen::ArrayXXd& X, const Eigen::ArrayXXd& Y) {
  SsimChannel s;
  s.mux = box3(X);
  s.muy = box3(Y);
  const Eigen::ArrayXXd mxx = box3(X * X);
  const Eigen::ArrayXXd myy = box3(Y * Y);
  const Eigen::ArrayXXd mxy = box3(X * Y);
  const Eigen::ArrayXXd sxx = mxx - s.mux * s.mux;
  const Eigen::ArrayXXd syy = myy - s.muy * s.muy;
  const Eigen::ArrayXXd sxy = mxy - s.mux * s.muy;
  s.A1 = 2.0 * s.mux * s.muy + kSsimC1;
  s.A2 = 2.0 * sxy + kSsimC2;
  s.B1 = s.mux * s.mux + s.muy * s.muy + kSsimC1;
  s.B2 = sxx + syy + kSsimC2;
  s.S = (s.A1 * s.A2) / (s.B1 * s.B2);
  return s;
}

// Gradient of sum(dS * S) with respect to Y for one channel.
Eigen::ArrayXXd ssim_channel_backward(const Eigen::ArrayXXd& X, const Eigen::ArrayXXd& Y,
                                      const SsimChannel& s, const Eigen::ArrayXXd& dS) {
  const Eigen::ArrayXXd BB = s.B1 * s.B2;
  const Eigen::ArrayXXd dS_dmuy =
      2.0 * s.mux * (s.A2 - s.A1) / BB - s.S * 2.0 * s.muy * (s.B2 - s.B1) / BB;
  const Eigen::ArrayXXd dS_dmyy = -s.S / s.B2;
  const Eigen::ArrayXXd dS_dmxy = 2.0 * s.A1 / BB;
  return box3_adjoint((dS * dS_dmuy).eval()) +
         box3_adjoint((dS * dS_dmyy).eval()) * 2.0 * Y +
         box3_adjoint((dS * dS_dmxy).eval()) * X;
}

// Channel-mean L1 difference, H x W.
Eigen::ArrayXXd l1_map(const Image& a, const Image& b) {
  Eigen::ArrayXXd out = Eigen::ArrayXXd::Zero(a.height, a.width);
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x) {
      double sum = 0.0;
      for (int c = 0; c < a.channels; ++c) sum += std::abs(a.at(y, x, c) - b.at(y, x, c));
      out(y, x) = sum / a.channels;
    }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  const double all[] = {alpha, beta1, beta2, beta3, beta4, gamma, margin};
  for (double v : all)
    if (!std::isfinite(v) || v < 0.0) throw DataError("LossWeights: negative or non-finite weight");
  if (gamma > 1.0) throw DataError("LossWeights: gamma must lie in [0, 1]");
}

Projection warp_keypoints(const PointCloud3& target_points, const Pose& pose,
                          const CameraIntrinsics& K) {
  return project(transform(pose, target_points), K);
}

WarpGrad warp_keypoints_backward(const PointCloud3& target_points, const Pose& pose,
                                 const CameraIntrinsics& K, const Pixels& grad_pixels) {
  const PointCloud3 moved = transform(pose, target_points);
  const PointCloud3 d_moved = project_backward(moved, K, grad_pixels);
  const TransformGrad tg = transform_backward(pose, target_points, d_moved);
  return WarpGrad{tg.points, tg.rotation, tg.translation};
}

GeometricLoss geometric_loss(const Pixels& warped, const Pixels& context) {
  if (warped.cols() != context.cols()) throw DataError("geometric_loss: size mismatch");
  const Eigen::Index n = warped.cols();
  GeometricLoss out;
  out.d_warped.setZero(2, n);
  out.d_context.setZero(2, n);
  if (n == 0) return out;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector2d d = warped.col(i) - context.col(i);
    const double e = d.norm();
    sum += e;
    if (e > 0.0) {
      out.d_warped.col(i) = d / (e * static_cast<double>(n));
      out.d_context.col(i) = -out.d_warped.col(i);
    }
  }
  out.value = sum / static_cast<double>(n);
  return out;
}

TripletLoss descriptor_triplet_loss(const Eigen::MatrixXd& anchor, const Eigen::MatrixXd& positive,
                                    const Eigen::MatrixXd& negative, double margin) {
  if (anchor.rows() != positive.rows() || anchor.rows() != negative.rows() ||
      anchor.cols() != positive.cols() || anchor.cols() != negative.cols())
    throw DataError("descriptor_triplet_loss: shape mismatch");
  if (!(margin >= 0.0)) throw DataError("descriptor_triplet_loss: margin must be >= 0");
  const Eigen::Index m = anchor.cols();
  TripletLoss out;
  out.d_anchor.setZero(anchor.rows(), m);
  out.d_positive.setZero(anchor.rows(), m);
  out.d_negative.setZero(anchor.rows(), m);
  if (m == 0) return out;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::VectorXd dp = anchor.col(i) - positive.col(i);
    const Eigen::VectorXd dn = anchor.col(i) - negative.col(i);
    const double np = dp.norm();
    const double nn = dn.norm();
    const double hinge = np - nn + margin;
    if (hinge <= 0.0) continue;  // inactive (gradient at the kink is 0)
    sum += hinge;
    const double inv_m = 1.0 / static_cast<double>(m);
    const Eigen::VectorXd up = np > 0.0 ? (dp / np).eval() : Eigen::VectorXd::Zero(dp.size());
    const Eigen::VectorXd un = nn > 0.0 ? (dn / nn).eval() : Eigen::VectorXd::Zero(dn.size());
    out.d_anchor.col(i) = (up - un) * inv_m;
    out.d_positive.col(i) = -up * inv_m;
    out.d_negative.col(i) = un * inv_m;
  }
  out.value = sum / static_cast<double>(m);
  return out;
}

ScoreLoss score_loss(const Eigen::VectorXd& target_scores, const Eigen::VectorXd& context_scores,
                     const Pixels& warped, const Pixels& context) {
  const Eigen::Index n = target_scores.size();
  if (context_scores.size() != n || warped.cols() != n || context.cols() != n)
    throw DataError("score_loss: size mismatch");
  ScoreLoss out;
  out.d_target_scores.setZero(n);
  out.d_context_scores.setZero(n);
  out.d_warped.setZero(2, n);
  out.d_context.setZero(2, n);
  if (n == 0) return out;

  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd err(n);
  for (Eigen::Index i = 0; i < n; ++i) err(i) = (warped.col(i) - context.col(i)).norm();
  const double mean_err = err.mean();
  const Eigen::VectorXd s_mean = 0.5 * (target_scores + context_scores);
  const Eigen::VectorXd s_diff = target_scores - context_scores;

  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    sum += s_mean(i) * (err(i) - mean_err) + s_diff(i) * s_diff(i);
  out.value = sum * inv_n;

  const double s_mean_avg = s_mean.mean();
  for (Eigen::Index i = 0; i < n; ++i) {
    out.d_target_scores(i) = inv_n * (0.5 * (err(i) - mean_err) + 2.0 * s_diff(i));
    out.d_context_scores(i) = inv_n * (0.5 * (err(i) - mean_err) - 2.0 * s_diff(i));
    const double d_err = inv_n * (s_mean(i) - s_mean_avg);
    if (err(i) > 0.0) {
      const Eigen::Vector2d dir = (warped.col(i) - context.col(i)) / err(i);
      out.d_warped.col(i) = d_err * dir;
      out.d_context.col(i) = -d_err * dir;
    }
  }
  return out;
}

BilinearImageResult bilinear_sample(const Image& img, const Pixels& coords) {
  const Eigen::Index m = coords.cols();
  BilinearImageResult out;
  out.values.setZero(m, img.channels);
  out.valid.assign(static_cast<std::size_t>(m), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const BilinearWeights w = bilinear_weights(coords(0, i), coords(1, i), img.width, img.height);
    if (!w.ok) continue;
    for (int c = 0; c < img.channels; ++c) {
      const double top = (1.0 - w.fx) * img.at(w.y0, w.x0, c) + w.fx * img.at(w.y0, w.x1, c);
      const double bot = (1.0 - w.fx) * img.at(w.y1, w.x0, c) + w.fx * img.at(w.y1, w.x1, c);
      out.values(i, c) = (1.0 - w.fy) * top + w.fy * bot;
    }
    out.valid[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

Pixels bilinear_sample_backward(const Image& img, const Pixels& coords,
                                const Eigen::MatrixXd& grad_values) {
  const Eigen::Index m = coords.cols();
  if (grad_values.rows() != m || grad_values.cols() != img.channels)
    throw DataError("bilinear_sample_backward: gradient shape mismatch");
  Pixels grad = Pixels::Zero(2, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const BilinearWeights w = bilinear_weights(coords(0, i), coords(1, i), img.width, img.height);
    if (!w.ok) continue;
    for (int c = 0; c < img.channels; ++c) {
      const double du = (1.0 - w.fy) * (img.at(w.y0, w.x1, c) - img.at(w.y0, w.x0, c)) +
                        w.fy * (img.at(w.y1, w.x1, c) - img.at(w.y1, w.x0, c));
      const double dv = (1.0 - w.fx) * (img.at(w.y1, w.x0, c) - img.at(w.y0, w.x0, c)) +
                        w.fx * (img.at(w.y1, w.x1, c) - img.at(w.y0, w.x1, c));
      grad(0, i) += grad_values(i, c) * du;
      grad(1, i) += grad_values(i, c) * dv;
    }
  }
  return grad;
}

BilinearDepthResult bilinear_sample(const DepthMap& depth, const Pixels& coords) {
  const Eigen::Index m = coords.cols();
  BilinearDepthResult out;
  out.values.setZero(m);
  out.valid.assign(static_cast<std::size_t>(m), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    const BilinearWeights w =
        bilinear_weights(coords(0, i), coords(1, i), depth.width, depth.height);
    if (!w.ok) continue;
    const double top = (1.0 - w.fx) * depth.at(w.y0, w.x0) + w.fx * depth.at(w.y0, w.x1);
    const double bot = (1.0 - w.fx) * depth.at(w.y1, w.x0) + w.fx * depth.at(w.y1, w.x1);
    out.values(i) = (1.0 - w.fy) * top + w.fy * bot;
    out.valid[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

Pixels bilinear_sample_backward(const DepthMap& depth, const Pixels& coords,
                                const Eigen::VectorXd& grad_values) {
  const Eigen::Index m = coords.cols();
  if (grad_values.size() != m) throw DataError("bilinear_sample_backward: gradient size mismatch");
  Pixels grad = Pixels::Zero(2, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const BilinearWeights w =
        bilinear_weights(coords(0, i), coords(1, i), depth.width, depth.height);
    if (!w.ok) continue;
    const double du = (1.0 - w.fy) * (depth.at(w.y0, w.x1) - depth.at(w.y0, w.x0)) +
                      w.fy * (depth.at(w.y1, w.x1) - depth.at(w.y1, w.x0));
    const double dv = (1.0 - w.fx) * (depth.at(w.y1, w.x0) - depth.at(w.y0, w.x0)) +
                      w.fx * (depth.at(w.y1, w.x1) - depth.at(w.y0, w.x1));
    grad(0, i) = grad_values(i) * du;
    grad(1, i) = grad_values(i) * dv;
  }
  return grad;
}

SynthesizedView synthesize_view(const Image& context, const DepthMap& target_depth,
                                const Pose& pose, const CameraIntrinsics& K) {
  const int H = target_depth.height;
  const int W = target_depth.width;
  SynthesizedView out{Image(H, W, context.channels, 0.0),
                      std::vector<std::uint8_t>(static_cast<std::size_t>(H) * W, 0)};
  const Eigen::Matrix3d& R = pose.rotation();
  const Eigen::Vector3d& t = pose.translation();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double d = target_depth.at(y, x);
      if (!(d > 0.0)) continue;
      const Eigen::Vector3d p((x - K.cx) / K.fx * d, (y - K.cy) / K.fy * d, d);
      const Eigen::Vector3d q = R * p + t;
      if (q.z() <= 0.0) continue;
      double u = K.fx * q.x() / q.z() + K.cx;
      double v = K.fy * q.y() / q.z() + K.cy;
      // Projections within rounding error of a pixel center snap to it, so a
      // no-motion resynthesis reproduces the context image bit for bit.
      if (std::abs(u - std::round(u)) < 1e-9 * std::max(1.0, std::abs(u))) u = std::round(u);
      if (std::abs(v - std::round(v)) < 1e-9 * std::max(1.0, std::abs(v))) v = std::round(v);
      const BilinearWeights w = bilinear_weights(u, v, context.width, context.height);
      if (!w.ok) continue;
      for (int c = 0; c < context.channels; ++c) {
        const double top = (1.0 - w.fx) * context.at(w.y0, w.x0, c) + w.fx * context.at(w.y0, w.x1, c);
        const double bot = (1.0 - w.fx) * context.at(w.y1, w.x0, c) + w.fx * context.at(w.y1, w.x1, c);
        out.image.at(y, x, c) = (1.0 - w.fy) * top + w.fy * bot;
      }
      out.valid[static_cast<std::size_t>(y) * W + x] = 1;
    }
  }
  return out;
}

Eigen::ArrayXXd ssim(const Image& x, const Image& y) {
  if (!x.same_shape(y)) throw DataError("ssim: shape mismatch");
  if (x.height == 0 || x.width == 0) throw DataError("ssim: empty image");
  Eigen::ArrayXXd map = Eigen::ArrayXXd::Zero(x.height, x.width);
  for (int c = 0; c < x.channels; ++c) {
    const Eigen::ArrayXXd X = channel_array(x, c);
    const Eigen::ArrayXXd Y = channel_array(y, c);
    map += ssim_channel(X, Y).S;
  }
  map /= static_cast<double>(x.channels);
  return map;
}

PhotometricLoss photometric_loss(const Image& target, const Image& synthesized, double gamma,
                                 const std::vector<std::uint8_t>* valid) {
  if (!target.same_shape(synthesized)) throw DataError("photometric_loss: shape mismatch");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DataError("photometric_loss: gamma outside [0, 1]");
  const std::size_t n_px = static_cast<std::size_t>(target.height) * target.width;
  if (valid && valid->size() != n_px) throw DataError("photometric_loss: mask size mismatch");

  PhotometricLoss out;
  out.map = gamma * (1.0 - ssim(target, synthesized)) / 2.0 +
            (1.0 - gamma) * l1_map(target, synthesized);
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < target.height; ++y) {
    for (int x = 0; x < target.width; ++x) {
      if (valid && !(*valid)[static_cast<std::size_t>(y) * target.width + x]) continue;
      sum += out.map(y, x);
      ++count;
    }
  }
  out.value = count > 0 ? sum / static_cast<double>(count) : 0.0;
  return out;
}

Image photometric_loss_backward(const Image& target, const Image& synthesized, double gamma,
                                const std::vector<std::uint8_t>* valid) {
  if (!target.same_shape(synthesized)) throw DataError("photometric_loss_backward: shape mismatch");
  const std::size_t n_px = static_cast<std::size_t>(target.height) * target.width;
  if (valid && valid->size() != n_px)
    throw DataError("photometric_loss_backward: mask size mismatch");

  std::size_t count = 0;
  if (valid) {
    for (std::uint8_t f : *valid) count += (f != 0);
  } else {
    count = n_px;
  }
  Image grad(target.height, target.width, target.channels, 0.0);
  if (count == 0) return grad;

  // d(value)/d(map) is 1/count on counted pixels.
  Eigen::ArrayXXd d_map = Eigen::ArrayXXd::Zero(target.height, target.width);
  for (int y = 0; y < target.height; ++y)
    for (int x = 0; x < target.width; ++x)
      if (!valid || (*valid)[static_cast<std::size_t>(y) * target.width + x])
        d_map(y, x) = 1.0 / static_cast<double>(count);

  const Eigen::ArrayXXd dS = d_map * (-gamma / 2.0) / static_cast<double>(target.channels);
  const double l1_w = (1.0 - gamma) / static_cast<double>(target.channels);
  for (int c = 0; c < target.channels; ++c) {
    const Eigen::ArrayXXd X = channel_array(target, c);
    const Eigen::ArrayXXd Y = channel_array(synthesized, c);
    const SsimChannel s = ssim_channel(X, Y);
    const Eigen::ArrayXXd g_ssim = ssim_channel_backward(X, Y, s, dS);
    for (int y = 0; y < target.height; ++y)
      for (int x = 0; x < target.width; ++x)
        grad.at(y, x, c) = g_ssim(y, x) + d_map(y, x) * l1_w * sign0(Y(y, x) - X(y, x));
  }
  return grad;
}

std::vector<std::uint8_t> auto_mask(const Image& target, const Image& synthesized,
                                    const Image& context, double gamma) {
  const Eigen::ArrayXXd warped = photometric_loss(target, synthesized, gamma).map;
  const Eigen::ArrayXXd unwarped = photometric_loss(target, context, gamma).map;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(target.height) * target.width, 0);
  for (int y = 0; y < target.height; ++y)
    for (int x = 0; x < target.width; ++x)
      mask[static_cast<std::size_t>(y) * target.width + x] = warped(y, x) < unwarped(y, x) ? 1 : 0;
  return mask;
}

SmoothnessLoss smoothness_loss(const DepthMap& depth, const Image& image) {
  depth.validate();
  if (image.height != depth.height || image.width != depth.width)
    throw DataError("smoothness_loss: image/depth size mismatch");
  const int H = depth.height;
  const int W = depth.width;
  const std::size_t n_px = static_cast<std::size_t>(H) * W;

  // Mean-normalized inverse depth.
  std::vector<double> u(n_px);
  double u_sum = 0.0;
  for (std::size_t i = 0; i < n_px; ++i) {
    u[i] = 1.0 / depth.data[i];
    u_sum += u[i];
  }
  const double u_mean = u_sum / static_cast<double>(n_px);
  auto dhat = [&](int y, int x) { return u[static_cast<std::size_t>(y) * W + x] / u_mean; };

  auto edge_weight = [&](int y0, int x0, int y1, int x1) {
    double g = 0.0;
    for (int c = 0; c < image.channels; ++c)
      g += std::abs(image.at(y1, x1, c) - image.at(y0, x0, c));
    return std::exp(-g / image.channels);
  };

  SmoothnessLoss out;
  out.d_depth = DepthMap(H, W, 0.0);
  std::vector<double> g_dhat(n_px, 0.0);  // gradient w.r.t. normalized inverse depth

  const int nx = H * (W - 1);
  const int ny = (H - 1) * W;
  double sum_x = 0.0, sum_y = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x + 1 < W; ++x) {
      const double w = edge_weight(y, x, y, x + 1);
      const double diff = dhat(y, x + 1) - dhat(y, x);
      sum_x += std::abs(diff) * w;
      const double g = sign0(diff) * w / nx;
      g_dhat[static_cast<std::size_t>(y) * W + x + 1] += g;
      g_dhat[static_cast<std::size_t>(y) * W + x] -= g;
    }
  }
  for (int y = 0; y + 1 < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double w = edge_weight(y, x, y + 1, x);
      const double diff = dhat(y + 1, x) - dhat(y, x);
      sum_y += std::abs(diff) * w;
      const double g = sign0(diff) * w / ny;
      g_dhat[static_cast<std::size_t>(y + 1) * W + x] += g;
      g_dhat[static_cast<std::size_t>(y) * W + x] -= g;
    }
  }
  out.value = (nx > 0 ? sum_x / nx : 0.0) + (ny > 0 ? sum_y / ny : 0.0);

  // Chain through the mean normalization, then through u = 1/D.
  double g_dot_u = 0.0;
  for (std::size_t i = 0; i < n_px; ++i) g_dot_u += g_dhat[i] * u[i];
  for (std::size_t i = 0; i < n_px; ++i) {
    const double du = g_dhat[i] / u_mean - g_dot_u / (u_mean * u_mean * static_cast<double>(n_px));
    out.d_depth.data[i] = -du / (depth.data[i] * depth.data[i]);
  }
  return out;
}

DepthConsistencyLoss depth_consistency_loss(const Eigen::VectorXd& target_depths,
                                            const DepthMap& context_depth,
                                            const Pixels& context_pixels) {
  const Eigen::Index n = target_depths.size();
  if (context_pixels.cols() != n) throw DataError("depth_consistency_loss: size mismatch");
  if (n > 0 && target_depths.minCoeff() <= 0.0)
    throw DataError("depth_consistency_loss: target depths must be positive");

  const BilinearDepthResult samples = bilinear_sample(context_depth, context_pixels);
  DepthConsistencyLoss out;
  out.d_target_depths.setZero(n);
  out.used = samples.valid;
  Eigen::VectorXd d_samples = Eigen::VectorXd::Zero(n);

  int n_used = 0;
  for (Eigen::Index i = 0; i < n; ++i) n_used += (samples.valid[static_cast<std::size_t>(i)] != 0);
  if (n_used == 0) {
    out.d_context_pixels = Pixels::Zero(2, n);
    return out;
  }

  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!samples.valid[static_cast<std::size_t>(i)]) continue;
    const double a = target_depths(i);
    const double b = samples.values(i);
    const double denom = a + b;
    const double diff = a - b;
    sum += std::abs(diff) / denom;
    const double s = sign0(diff);
    out.d_target_depths(i) = (s * denom - std::abs(diff)) / (denom * denom * n_used);
    d_samples(i) = (-s * denom - std::abs(diff)) / (denom * denom * n_used);
  }
  out.value = sum / n_used;
  out.d_context_pixels = bilinear_sample_backward(context_depth, context_pixels, d_samples);
  return out;
}

TotalLoss total_loss(const LossTerms& terms, const LossWeights& w) {
  w.validate();
  TotalLoss out;
  out.terms = terms;
  out.keypoint_total = terms.geometric + w.beta1 * terms.descriptor + w.beta2 * terms.score;
  out.depth_total =
      terms.photometric + w.beta3 * terms.smoothness + w.beta4 * terms.depth_consistency;
  out.total = out.depth_total + w.alpha * out.keypoint_total;
  out.d_terms.geometric = w.alpha;
  out.d_terms.descriptor = w.alpha * w.beta1;
  out.d_terms.score = w.alpha * w.beta2;
  out.d_terms.photometric = 1.0;
  out.d_terms.smoothness = w.beta3;
  out.d_terms.depth_consistency = w.beta4;
  return out;
}

}  // namespace dak
