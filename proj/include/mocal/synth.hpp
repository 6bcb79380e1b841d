#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mocal/calib.hpp"
#include "mocal/errors.hpp"
#include "mocal/geometry.hpp"
#include "mocal/image.hpp"
#include "mocal/upsample.hpp"

namespace mocal {

/// Deterministic synthetic urban-ish scene: textured ground plane, a back
/// wall, static pillars and rigid moving boxes, observed by a moving
/// LiDAR-camera rig with known extrinsics.
struct SceneSpec {
  std::uint64_t rng_seed = 0;
  int n_static_points = 6000;
  int n_moving_objects = 3;
  double object_speed_min = 0.08;  // m/frame
  double object_speed_max = 0.25;  // m/frame
  CalibParams ego_step;            // per-frame rig motion, applied to scene coords
  CalibParams true_extrinsics;
  Intrinsics intrinsics;
  int frames = 6;                  // L+1
  double point_noise_sigma = 0.0;  // m, LiDAR range jitter (clouds only)
};

/// Everything the generator knows exactly.
struct GroundTruth {
  CalibParams theta;
  // Per frame: z-buffered scene depth in the camera image; support marks
  // pixels covered by any splat. Exact point hits take precedence over
  // splat spill so reprojected clouds match it bit-for-bit.
  std::vector<SparseDepthMap> dense_depth;
  // Per pair l: displacement of cloud point i from frame l to l+1, in the
  // frame-l LiDAR coordinates (noiseless).
  std::vector<std::vector<Eigen::Vector3d>> flow3d;
};

inline SceneSpec default_scene_spec(std::uint64_t seed, int frames = 6) {
  SceneSpec spec;
  spec.rng_seed = seed;
  spec.frames = frames;
  spec.intrinsics = {260.0, 260.0, 160.0, 120.0, 320, 240};
  spec.true_extrinsics = {0.03, -0.02, 0.025, 0.10, -0.06, 0.15};
  spec.ego_step = {0.0, 0.0, 0.0035, 0.02, 0.0, 0.22};
  return spec;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline double lattice_value(std::int64_t x, std::int64_t y, std::int64_t z,
                            std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(x) ^
                                                 splitmix64(static_cast<std::uint64_t>(y) ^
                                                            splitmix64(static_cast<std::uint64_t>(z)))));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

/// Trilinear value noise in [0,1]; feature size set by `scale` (meters).
inline double value_noise(const Eigen::Vector3d& p, double scale, std::uint64_t seed) {
  const double x = p.x() / scale, y = p.y() / scale, z = p.z() / scale;
  const std::int64_t x0 = static_cast<std::int64_t>(std::floor(x));
  const std::int64_t y0 = static_cast<std::int64_t>(std::floor(y));
  const std::int64_t z0 = static_cast<std::int64_t>(std::floor(z));
  const double fx = x - x0, fy = y - y0, fz = z - z0;
  double acc = 0.0;
  for (int dz = 0; dz <= 1; ++dz)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
        acc += w * lattice_value(x0 + dx, y0 + dy, z0 + dz, seed);
      }
  return acc;
}

struct ScenePoint {
  Eigen::Vector3d base;      // world position at frame 0
  Eigen::Vector3d velocity;  // m/frame, zero for static geometry
  double albedo;             // texture value in [0,1]
};

inline double point_albedo(const Eigen::Vector3d& anchor, std::uint64_t seed) {
  const double coarse = value_noise(anchor, 1.8, seed ^ 0xa5a5a5a5ull);
  const double fine = value_noise(anchor, 0.7, seed ^ 0x3c3c3c3cull);
  return 0.25 + 0.7 * (0.65 * coarse + 0.35 * fine);
}

}  // namespace detail

/// Z-buffered reprojection of one cloud: nearest depth wins per pixel,
/// support marks pixels hit.
inline SparseDepthMap sparse_depth_of(const FrameSequence& seq, int l,
                                      const CalibParams& theta) {
  const Intrinsics& k = seq.intrinsics;
  const RigidTransform t = euler_to_matrix(theta);
  SparseDepthMap out(k.width, k.height);
  for (const Point3& p : seq.frames[l].cloud.points) {
    const Point3 cam = t(p);
    const auto px = project(k, cam);
    if (!px) continue;
    const int x = static_cast<int>(px->u + 0.5);
    const int y = static_cast<int>(px->v + 0.5);
    if (x < 0 || x >= k.width || y < 0 || y >= k.height) continue;
    const std::size_t n = out.idx(y, x);
    if (!out.support[n] || cam.z() < out.depth[n]) {
      out.depth[n] = cam.z();
      out.support[n] = 1;
    }
  }
  return out;
}

/// Generate a frame sequence plus exact ground truth. Rejects motionless
/// specs (identity ego step and no moving objects) with StaticScene.
inline std::pair<FrameSequence, GroundTruth> generate(const SceneSpec& spec) {
  const CalibParams ego = spec.ego_step.canonicalized();
  const bool ego_moves = std::abs(ego.roll) > 1e-12 || std::abs(ego.pitch) > 1e-12 ||
                         std::abs(ego.yaw) > 1e-12 || std::abs(ego.tx) > 1e-12 ||
                         std::abs(ego.ty) > 1e-12 || std::abs(ego.tz) > 1e-12;
  const bool objects_move = spec.n_moving_objects > 0 && spec.object_speed_max > 0.0;
  if (!ego_moves && !objects_move)
    throw StaticScene("generate: neither the rig nor any object moves");
  if (spec.frames < 2) throw Error("generate: need at least two frames");
  if (!spec.intrinsics.valid()) throw Error("generate: invalid intrinsics");

  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::uint64_t tex_seed = detail::splitmix64(spec.rng_seed ^ 0x7ea7ull);

  std::vector<detail::ScenePoint> scene;
  scene.reserve(spec.n_static_points + spec.n_moving_objects * 260);

  // Ground plane (y down is positive; sensor sits 1.6 m above ground).
  const int n_ground = spec.n_static_points / 2;
  for (int i = 0; i < n_ground; ++i) {
    Eigen::Vector3d p(-14.0 + 28.0 * uni(rng), 1.6, 3.0 + 37.0 * uni(rng));
    scene.push_back({p, Eigen::Vector3d::Zero(), detail::point_albedo(p, tex_seed)});
  }
  // Back wall.
  const int n_wall = spec.n_static_points / 5;
  for (int i = 0; i < n_wall; ++i) {
    Eigen::Vector3d p(-14.0 + 28.0 * uni(rng), -4.0 + 5.6 * uni(rng), 40.0);
    scene.push_back({p, Eigen::Vector3d::Zero(), detail::point_albedo(p, tex_seed)});
  }
  // Static pillars / boxes scattered through the field of view.
  const int n_pillar_pts = spec.n_static_points - n_ground - n_wall;
  const int n_pillars = 8;
  std::vector<Eigen::Vector3d> pillar_pos(n_pillars);
  std::vector<Eigen::Vector3d> pillar_dim(n_pillars);
  for (int j = 0; j < n_pillars; ++j) {
    pillar_pos[j] = {-10.0 + 20.0 * uni(rng), 1.6, 5.0 + 28.0 * uni(rng)};
    pillar_dim[j] = {0.5 + 1.2 * uni(rng), 2.0 + 1.5 * uni(rng), 0.5 + 1.2 * uni(rng)};
  }
  for (int i = 0; i < n_pillar_pts; ++i) {
    const int j = static_cast<int>(uni(rng) * n_pillars) % n_pillars;
    // Random point on one of the two camera-facing faces.
    const double face = uni(rng) < 0.7 ? 0.0 : 1.0;
    Eigen::Vector3d local(pillar_dim[j].x() * (uni(rng) - 0.5),
                          -pillar_dim[j].y() * uni(rng),
                          -0.5 * pillar_dim[j].z() * face);
    if (face > 0.5) local.x() = pillar_dim[j].x() * 0.5 * (uni(rng) < 0.5 ? -1.0 : 1.0);
    Eigen::Vector3d p = pillar_pos[j] + local;
    scene.push_back({p, Eigen::Vector3d::Zero(), detail::point_albedo(p, tex_seed)});
  }
  // Rigid moving boxes.
  for (int j = 0; j < spec.n_moving_objects; ++j) {
    const Eigen::Vector3d center(-8.0 + 16.0 * uni(rng), 1.0, 6.0 + 18.0 * uni(rng));
    const Eigen::Vector3d dim(0.6 + 1.2 * uni(rng), 1.0 + 0.9 * uni(rng),
                              0.6 + 1.2 * uni(rng));
    const double speed = spec.object_speed_min +
                         (spec.object_speed_max - spec.object_speed_min) * uni(rng);
    const double heading = 2.0 * std::numbers::pi * uni(rng);
    const Eigen::Vector3d vel(speed * std::cos(heading), 0.0, speed * std::sin(heading));
    const int n_pts = 260;
    for (int i = 0; i < n_pts; ++i) {
      Eigen::Vector3d local(dim.x() * (uni(rng) - 0.5), -dim.y() * uni(rng),
                            dim.z() * (uni(rng) - 0.5));
      // Texture rides with the object: albedo from local coordinates.
      const double albedo = detail::point_albedo(
          local + Eigen::Vector3d(100.0 * (j + 1), 0, 0), tex_seed);
      scene.push_back({center + local, vel, albedo});
    }
  }

  // Rig trajectory: world -> lidar(l) transforms, composed per frame.
  const int nf = spec.frames;
  std::vector<RigidTransform> world_to_lidar(nf);
  world_to_lidar[0] = RigidTransform{};
  const RigidTransform ego_t = euler_to_matrix(ego);
  for (int l = 1; l < nf; ++l)
    world_to_lidar[l] = ego_t.compose(world_to_lidar[l - 1]);

  const RigidTransform extr = euler_to_matrix(spec.true_extrinsics);
  const Intrinsics& k = spec.intrinsics;

  std::normal_distribution<double> jitter(0.0, 1.0);

  FrameSequence seq;
  seq.intrinsics = k;
  seq.frames.resize(nf);
  GroundTruth gt;
  gt.theta = spec.true_extrinsics;
  gt.dense_depth.assign(nf, SparseDepthMap(k.width, k.height));
  gt.flow3d.assign(nf - 1, {});

  std::vector<Eigen::Vector3d> lidar_pts(scene.size());
  std::vector<Eigen::Vector3d> lidar_pts_next(scene.size());

  for (int l = 0; l < nf; ++l) {
    for (std::size_t i = 0; i < scene.size(); ++i) {
      const Eigen::Vector3d world = scene[i].base + l * scene[i].velocity;
      lidar_pts[i] = world_to_lidar[l](world);
    }

    // Render the camera view: exact-hit pass then 3x3 splat fill, both
    // z-buffered; intensity follows the splat winner, depth-shaded.
    GrayImage img(k.width, k.height, 0.0f);
    SparseDepthMap& depth = gt.dense_depth[l];
    SparseDepthMap center_hits(k.width, k.height);
    std::vector<double> splat_z(depth.size(), 0.0);
    std::vector<std::uint8_t> splat_set(depth.size(), 0);

    for (std::size_t i = 0; i < scene.size(); ++i) {
      const Point3 cam = extr(lidar_pts[i]);
      const auto px = project(k, cam);
      if (!px) continue;
      const int x = static_cast<int>(px->u + 0.5);
      const int y = static_cast<int>(px->v + 0.5);
      if (x < 0 || x >= k.width || y < 0 || y >= k.height) continue;
      const std::size_t n = center_hits.idx(y, x);
      if (!center_hits.support[n] || cam.z() < center_hits.depth[n]) {
        center_hits.depth[n] = cam.z();
        center_hits.support[n] = 1;
      }
      const float shade = static_cast<float>(
          std::clamp(scene[i].albedo * (1.05 - cam.z() / 80.0), 0.05, 1.0));
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx < 0 || sx >= k.width || sy < 0 || sy >= k.height) continue;
          const std::size_t m = depth.idx(sy, sx);
          if (!splat_set[m] || cam.z() < splat_z[m]) {
            splat_z[m] = cam.z();
            splat_set[m] = 1;
            img.at(sx, sy) = shade;
          }
        }
      }
    }
    for (std::size_t n = 0; n < depth.size(); ++n) {
      if (center_hits.support[n]) {
        depth.depth[n] = center_hits.depth[n];
        depth.support[n] = 1;
      } else if (splat_set[n]) {
        depth.depth[n] = splat_z[n];
        depth.support[n] = 1;
      }
    }

    Frame& frame = seq.frames[l];
    frame.image = std::move(img);
    frame.image_time = frame.cloud_time = 0.1 * l;
    frame.cloud.points = lidar_pts;
    if (spec.point_noise_sigma > 0.0) {
      for (Point3& p : frame.cloud.points) {
        p.x() += spec.point_noise_sigma * jitter(rng);
        p.y() += spec.point_noise_sigma * jitter(rng);
        p.z() += spec.point_noise_sigma * jitter(rng);
      }
    }

    if (l + 1 < nf) {
      auto& flow = gt.flow3d[l];
      flow.resize(scene.size());
      for (std::size_t i = 0; i < scene.size(); ++i) {
        const Eigen::Vector3d world_next = scene[i].base + (l + 1) * scene[i].velocity;
        flow[i] = world_to_lidar[l + 1](world_next) - lidar_pts[i];
      }
    }
  }

  return {std::move(seq), std::move(gt)};
}

}  // namespace mocal
