#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mocal/assign.hpp"
#include "mocal/errors.hpp"
#include "mocal/flow.hpp"
#include "mocal/geometry.hpp"
#include "mocal/image.hpp"
#include "mocal/nelder_mead.hpp"

namespace mocal {

/// One time-synchronized sensor pair. image_time orders the sequence;
/// cloud_time may lag or lead within the sync tolerance.
struct Frame {
  GrayImage image;
  PointCloud cloud;
  double image_time = 0.0;  // s
  double cloud_time = 0.0;  // s
};

struct FrameSequence {
  Intrinsics intrinsics;
  std::vector<Frame> frames;  // length L+1

  int pairs() const { return static_cast<int>(frames.size()) - 1; }
};

/// Throws SyncViolation when timestamps are not strictly increasing or the
/// per-frame image/cloud skew exceeds the tolerance.
inline void validate_sync(const FrameSequence& seq, double sync_tol) {
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const Frame& f = seq.frames[i];
    if (std::abs(f.image_time - f.cloud_time) > sync_tol)
      throw SyncViolation("frame " + std::to_string(i) + ": image/cloud skew " +
                          std::to_string(std::abs(f.image_time - f.cloud_time)) +
                          " s exceeds tolerance");
    if (i > 0 && !(f.image_time > seq.frames[i - 1].image_time))
      throw SyncViolation("timestamps not strictly increasing at frame " +
                          std::to_string(i));
  }
}

/// One usable motion comparison: where it sits in the image and the two
/// unit motion directions being compared.
struct MotionSamplePair {
  PixelCoord pixel;
  Eigen::Vector2d cam_vec;
  Eigen::Vector2d lidar_vec;
};

/// Project 3D motion vectors into the image plane through theta. For every
/// valid-flow point both endpoints must reproject inside the image;
/// anything else is silently dropped.
inline std::vector<std::pair<PixelCoord, Eigen::Vector2d>> lidar_motion_to_image(
    const CalibParams& theta, const Intrinsics& k, const PointCloud& src,
    const SceneFlow3D& sf) {
  const RigidTransform t = euler_to_matrix(theta);
  std::vector<std::pair<PixelCoord, Eigen::Vector2d>> out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!sf.valid[i]) continue;
    const auto q0 = project(k, t(src.points[i]));
    if (!q0) continue;
    const auto q1 = project(k, t(src.points[i] + sf.displacement[i]));
    if (!q1) continue;
    out.emplace_back(*q0, Eigen::Vector2d(q1->u - q0->u, q1->v - q0->v));
  }
  return out;
}

struct ObjectiveOptions {
  double min_vec_norm = 0.05;  // px; weaker motion carries no direction
  double empty_penalty = 2.0;  // per-pair cost when no samples survive
  bool raw_pair_norm = false;  // stacked norm without the 1/sqrt(n) factor
  bool nearest_pixel = false;  // sample camera flow at the rounded pixel
};

namespace detail {

inline std::pair<double, double> flow_at(const FlowField2D& f, const PixelCoord& px,
                                         bool nearest) {
  if (!nearest) return sample_flow(f, px);
  const int x = std::min(static_cast<int>(px.u + 0.5), f.width - 1);
  const int y = std::min(static_cast<int>(px.v + 0.5), f.height - 1);
  return {f.u[f.idx(x, y)], f.v[f.idx(x, y)]};
}

}  // namespace detail

/// Unit-normalized motion comparisons for one frame pair at a given theta.
inline std::vector<MotionSamplePair> motion_sample_pairs(
    const CalibParams& theta, const Intrinsics& k, const FlowField2D& cam_flow,
    const PointCloud& src, const SceneFlow3D& sf, const ObjectiveOptions& opts = {}) {
  std::vector<MotionSamplePair> samples;
  for (const auto& [pixel, lidar_vec] : lidar_motion_to_image(theta, k, src, sf)) {
    const double ln = lidar_vec.norm();
    if (ln < opts.min_vec_norm) continue;
    const auto [cu, cv] = detail::flow_at(cam_flow, pixel, opts.nearest_pixel);
    Eigen::Vector2d cam_vec(cu, cv);
    const double cn = cam_vec.norm();
    if (cn < opts.min_vec_norm) continue;
    samples.push_back({pixel, cam_vec / cn, lidar_vec / ln});
  }
  return samples;
}

/// Motion-consistency cost over the L precomputed pairs: mean over pairs of
/// the l2 distance between stacked unit camera and reprojected LiDAR motion
/// vectors, each pair normalized by sqrt(sample count) unless raw_pair_norm.
/// Pairs with no usable samples contribute empty_penalty; if every pair is
/// empty the scene carries no motion information and NoMotion is thrown.
inline double objective(const CalibParams& theta, const FrameSequence& seq,
                        const std::vector<FlowField2D>& flows2d,
                        const std::vector<SceneFlow3D>& flows3d,
                        const ObjectiveOptions& opts = {},
                        std::vector<std::size_t>* sample_counts = nullptr) {
  const int pairs = static_cast<int>(flows2d.size());
  if (sample_counts) sample_counts->assign(pairs, 0);
  double total = 0.0;
  int empty_pairs = 0;
  for (int l = 0; l < pairs; ++l) {
    const auto samples = motion_sample_pairs(theta, seq.intrinsics, flows2d[l],
                                             flows3d[l].source, flows3d[l], opts);
    if (sample_counts) (*sample_counts)[l] = samples.size();
    if (samples.empty()) {
      ++empty_pairs;
      total += opts.empty_penalty;
      continue;
    }
    double sq = 0.0;
    for (const MotionSamplePair& s : samples)
      sq += (s.cam_vec - s.lidar_vec).squaredNorm();
    double d = std::sqrt(sq);
    if (!opts.raw_pair_norm) d /= std::sqrt(static_cast<double>(samples.size()));
    total += d;
  }
  if (empty_pairs == pairs)
    throw NoMotion("objective: no usable motion samples in any frame pair");
  return total / pairs;
}

struct CalibOptions {
  SimplexOptions simplex;
  ObjectiveOptions objective;
  SceneFlowOptions scene_flow;
  FlowOptions flow;
  double sync_tol = 0.025;  // s
};

struct CalibReport {
  CalibParams theta_hat;
  double final_cost = 0.0;
  int iters = 0;
  bool converged = false;
  std::vector<double> trace;               // best cost per iteration
  std::vector<std::size_t> sample_counts;  // per pair, at theta_hat
  std::optional<CalibParams> ground_truth;
  // theta_hat - ground_truth, angles wrapped, when ground truth is known.
  std::optional<Eigen::Matrix<double, 6, 1>> error;
};

inline Eigen::Matrix<double, 6, 1> param_error(const CalibParams& est,
                                               const CalibParams& gt) {
  Eigen::Matrix<double, 6, 1> e;
  e << wrap_angle(est.roll - gt.roll), wrap_angle(est.pitch - gt.pitch),
      wrap_angle(est.yaw - gt.yaw), est.tx - gt.tx, est.ty - gt.ty, est.tz - gt.tz;
  return e;
}

/// theta-independent precomputation: one optical flow field and one 3D
/// scene flow per consecutive pair.
inline std::pair<std::vector<FlowField2D>, std::vector<SceneFlow3D>>
precompute_motion(const FrameSequence& seq, const CalibOptions& opts = {}) {
  std::vector<FlowField2D> flows2d;
  std::vector<SceneFlow3D> flows3d;
  const int pairs = seq.pairs();
  flows2d.reserve(pairs);
  flows3d.reserve(pairs);
  for (int l = 0; l < pairs; ++l) {
    flows2d.push_back(tv_l1_flow(seq.frames[l].image, seq.frames[l + 1].image, opts.flow));
    flows3d.push_back(scene_flow(seq.frames[l].cloud, seq.frames[l + 1].cloud, opts.scene_flow));
  }
  return {std::move(flows2d), std::move(flows3d)};
}

/// Full self-calibration: precompute motion once, evaluate the objective at
/// the init (propagating NoMotion for motionless scenes), then minimize by
/// simplex. Mid-search vertices that lose every sample score the maximum
/// per-sample distance instead of aborting the search.
inline CalibReport calibrate(const FrameSequence& seq, const CalibOptions& opts = {},
                             std::optional<CalibParams> ground_truth = std::nullopt) {
  if (seq.pairs() < 1) throw Error("calibrate: need at least two frames");
  validate_sync(seq, opts.sync_tol);

  const auto [flows2d, flows3d] = precompute_motion(seq, opts);

  objective(opts.simplex.init, seq, flows2d, flows3d, opts.objective);

  auto cost_fn = [&](const CalibParams& theta) {
    try {
      return objective(theta, seq, flows2d, flows3d, opts.objective);
    } catch (const NoMotion&) {
      return opts.objective.empty_penalty;
    }
  };

  const NelderMeadResult nm = nelder_mead(cost_fn, opts.simplex);

  CalibReport report;
  report.theta_hat = nm.theta.canonicalized();
  report.final_cost = nm.cost;
  report.iters = nm.iters;
  report.converged = nm.converged;
  report.trace = nm.trace;
  objective(report.theta_hat, seq, flows2d, flows3d, opts.objective,
            &report.sample_counts);
  if (ground_truth) {
    report.ground_truth = ground_truth;
    report.error = param_error(report.theta_hat, *ground_truth);
  }
  return report;
}

}  // namespace mocal
