#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mocal/errors.hpp"
#include "mocal/geometry.hpp"

namespace mocal {

/// Pairwise Euclidean distances, rows = source points, cols = target points.
struct CostMatrix {
  Eigen::MatrixXd entries;

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
};

inline CostMatrix edm(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw EmptyCloud("edm: empty point cloud");
  CostMatrix c;
  c.entries.resize(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      c.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (a.points[i] - b.points[j]).norm();
  return c;
}

/// Injective row-to-column matching; every row is matched, no column twice.
struct Assignment {
  std::vector<int> match;  // column index per row

  int operator[](std::size_t row) const { return match[row]; }
  std::size_t size() const { return match.size(); }
};

/// Forward auction with epsilon scaling (Bertsekas). Total cost is within
/// rows*eps of the optimum of the injective matching problem; requires
/// rows <= cols.
inline Assignment solve_assignment(const CostMatrix& c, double eps) {
  const int n = c.rows();
  const int m = c.cols();
  if (n > m)
    throw InfeasibleShape("solve_assignment: more rows (" + std::to_string(n) +
                          ") than columns (" + std::to_string(m) + ")");
  if (eps <= 0) eps = 1e-12;

  std::vector<double> price(m, 0.0);
  std::vector<int> row_of_col(m, -1);
  std::vector<int> col_of_row(n, -1);

  const double cmax = c.entries.maxCoeff();
  double phase_eps = std::max(cmax / 4.0, eps);

  while (true) {
    std::fill(row_of_col.begin(), row_of_col.end(), -1);
    std::fill(col_of_row.begin(), col_of_row.end(), -1);

    // Bid queue: unassigned rows.
    std::vector<int> pending(n);
    for (int i = 0; i < n; ++i) pending[i] = i;

    while (!pending.empty()) {
      const int i = pending.back();
      pending.pop_back();

      // Best and second-best net value (minimization: cost + price).
      int best_j = -1;
      double best = std::numeric_limits<double>::infinity();
      double second = std::numeric_limits<double>::infinity();
      for (int j = 0; j < m; ++j) {
        const double v = c.entries(i, j) + price[j];
        if (v < best) {
          second = best;
          best = v;
          best_j = j;
        } else if (v < second) {
          second = v;
        }
      }
      const double increment =
          (second == std::numeric_limits<double>::infinity() ? phase_eps
                                                             : second - best) +
          phase_eps;
      price[best_j] += increment;
      if (row_of_col[best_j] >= 0) {
        col_of_row[row_of_col[best_j]] = -1;
        pending.push_back(row_of_col[best_j]);
      }
      row_of_col[best_j] = i;
      col_of_row[i] = best_j;
    }

    if (phase_eps <= eps) break;
    phase_eps = std::max(phase_eps / 4.0, eps);
  }

  Assignment a;
  a.match = std::move(col_of_row);
  return a;
}

inline double assignment_cost(const CostMatrix& c, const Assignment& a) {
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(a.size()); ++i) total += c.entries(i, a[i]);
  return total;
}

/// Per-point 3D displacement between two sweeps. `source` holds the points
/// the displacements refer to (after any pre-gating downsample).
struct SceneFlow3D {
  PointCloud source;
  std::vector<Eigen::Vector3d> displacement;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return displacement.size(); }
};

struct SceneFlowOptions {
  double max_match_dist = 1.0;  // m, matches beyond this are invalid flow
  double voxel_size = 0.3;      // m, 0 disables the pre-gating downsample
  double assign_tol = 1e-6;     // m, total-cost slack for the auction
};

/// Keep one representative point per voxel (the first seen in point order).
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (voxel <= 0.0) return cloud;
  struct Key {
    std::int64_t x, y, z;
    bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (std::int64_t v : {k.x, k.y, k.z}) {
        h ^= static_cast<std::uint64_t>(v);
        h *= 1099511628211ull;
      }
      return static_cast<std::size_t>(h);
    }
  };
  std::unordered_map<Key, int, KeyHash> seen;
  PointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points[i];
    Key k{static_cast<std::int64_t>(std::floor(p.x() / voxel)),
          static_cast<std::int64_t>(std::floor(p.y() / voxel)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
    if (seen.emplace(k, 1).second) {
      out.points.push_back(p);
      if (!cloud.reflectance.empty()) out.reflectance.push_back(cloud.reflectance[i]);
    }
  }
  return out;
}

/// Match src to dst by optimal assignment on the EDM and emit displacements.
/// When src has more points than dst, virtual columns at max_match_dist make
/// the problem feasible; rows landing on them become invalid flow.
inline SceneFlow3D scene_flow(const PointCloud& src, const PointCloud& dst,
                              const SceneFlowOptions& opts = {}) {
  if (src.empty() || dst.empty()) throw EmptyCloud("scene_flow: empty point cloud");
  const PointCloud a = voxel_downsample(src, opts.voxel_size);
  const PointCloud b = voxel_downsample(dst, opts.voxel_size);

  CostMatrix c = edm(a, b);
  const int n = c.rows();
  const int m = c.cols();
  const int m_real = m;
  if (n > m) {
    Eigen::MatrixXd padded(n, n);
    padded.setConstant(opts.max_match_dist);
    padded.leftCols(m) = c.entries;
    c.entries = std::move(padded);
  }

  const Assignment assign = solve_assignment(c, opts.assign_tol / n);

  SceneFlow3D sf;
  sf.source = a;
  sf.displacement.resize(a.size(), Eigen::Vector3d::Zero());
  sf.valid.resize(a.size(), 0);
  for (int i = 0; i < n; ++i) {
    const int j = assign[i];
    if (j < m_real && c.entries(i, j) <= opts.max_match_dist) {
      sf.displacement[i] = b.points[j] - a.points[i];
      sf.valid[i] = 1;
    }
  }
  return sf;
}

}  // namespace mocal
