#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "mocal/errors.hpp"

namespace mocal {

using Point3 = Eigen::Vector3d;

/// Continuous image-plane position, origin at the top-left pixel center,
/// u right (columns), v down (rows).
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::fmod(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  if (a > pi) a -= 2.0 * pi;
  return a;
}

/// 6-DOF LiDAR-to-camera extrinsics: ZYX Euler rotation (applied as
/// Rz(yaw) * Ry(pitch) * Rx(roll)) plus translation in meters.
struct CalibParams {
  double roll = 0.0;   // rad
  double pitch = 0.0;  // rad
  double yaw = 0.0;    // rad
  double tx = 0.0;     // m
  double ty = 0.0;     // m
  double tz = 0.0;     // m

  CalibParams canonicalized() const {
    return {wrap_angle(roll), wrap_angle(pitch), wrap_angle(yaw), tx, ty, tz};
  }

  Eigen::Matrix<double, 6, 1> to_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << roll, pitch, yaw, tx, ty, tz;
    return v;
  }

  static CalibParams from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
};

/// Rigid transform y = R x + t with R in SO(3).
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Point3 operator()(const Point3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }

  RigidTransform compose(const RigidTransform& inner) const {
    return {rotation * inner.rotation, rotation * inner.translation + translation};
  }
};

inline Eigen::Matrix3d rot_x(double a) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return m;
}

inline Eigen::Matrix3d rot_y(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return m;
}

inline Eigen::Matrix3d rot_z(double a) {
  Eigen::Matrix3d m;
  m << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return m;
}

inline RigidTransform euler_to_matrix(const CalibParams& p) {
  return {rot_z(p.yaw) * rot_y(p.pitch) * rot_x(p.roll),
          Eigen::Vector3d(p.tx, p.ty, p.tz)};
}

/// Recover ZYX Euler angles + translation. Degenerate at pitch = +-pi/2,
/// where yaw and roll are not separable; yaw absorbs the free angle there.
inline CalibParams from_matrix(const RigidTransform& t) {
  const Eigen::Matrix3d& r = t.rotation;
  const double sp = -r(2, 0);
  CalibParams p;
  p.pitch = std::asin(std::clamp(sp, -1.0, 1.0));
  if (std::abs(sp) < 1.0 - 1e-12) {
    p.roll = std::atan2(r(2, 1), r(2, 2));
    p.yaw = std::atan2(r(1, 0), r(0, 0));
  } else {
    p.roll = 0.0;
    p.yaw = std::atan2(-r(0, 1), r(1, 1));
  }
  p.tx = t.translation.x();
  p.ty = t.translation.y();
  p.tz = t.translation.z();
  return p;
}

/// 3D samples of one LiDAR sweep. Reflectance is carried through from
/// sensor logs but never used by the pipeline.
struct PointCloud {
  std::vector<Point3> points;
  std::vector<float> reflectance;  // empty or same length as points

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

inline PointCloud transform_points(const CalibParams& p, const PointCloud& cloud) {
  const RigidTransform t = euler_to_matrix(p);
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Point3& x : cloud.points) out.points.push_back(t(x));
  out.reflectance = cloud.reflectance;
  return out;
}

/// Zero-distortion pinhole camera.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && width > 0 && height > 0 && cx >= 0 &&
           cx < width && cy >= 0 && cy < height;
  }
};

constexpr double kDefaultZMin = 0.1;  // m, reprojection validity cutoff

/// Project a camera-frame point. Returns nullopt for points at or behind
/// z_min and for pixels outside [0,width) x [0,height); invalidity is a
/// value, not an error.
inline std::optional<PixelCoord> project(const Intrinsics& k, const Point3& pt,
                                         double z_min = kDefaultZMin) {
  if (!(pt.z() > z_min)) return std::nullopt;
  const double u = k.fx * pt.x() / pt.z() + k.cx;
  const double v = k.fy * pt.y() / pt.z() + k.cy;
  if (u < 0.0 || u >= k.width || v < 0.0 || v >= k.height) return std::nullopt;
  return PixelCoord{u, v};
}

/// Inverse of project() at a known depth.
inline Point3 back_project(const Intrinsics& k, const PixelCoord& px, double z) {
  return {(px.u - k.cx) * z / k.fx, (px.v - k.cy) * z / k.fy, z};
}

}  // namespace mocal
