#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "mocal/errors.hpp"

namespace mocal {

/// Depth map with an explicit support mask. Storage is column-major: pixel
/// (row r, col c) lives at index c*height + r, matching the vectorization
/// the gradient operator below is defined in.
struct SparseDepthMap {
  int width = 0;   // Nx
  int height = 0;  // Ny
  std::vector<double> depth;          // meters; meaningful only on support
  std::vector<std::uint8_t> support;  // 1 where a measurement exists

  SparseDepthMap() = default;
  SparseDepthMap(int w, int h)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, 0.0),
        support(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t idx(int row, int col) const {
    return static_cast<std::size_t>(col) * height + row;
  }
  std::size_t size() const { return depth.size(); }
  std::size_t support_count() const {
    std::size_t n = 0;
    for (auto s : support) n += s;
    return n;
  }
};

/// Fully populated depth map, same column-major layout.
struct DenseDepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;

  DenseDepthMap() = default;
  DenseDepthMap(int w, int h, double fill = 0.0)
      : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t idx(int row, int col) const {
    return static_cast<std::size_t>(col) * height + row;
  }
  std::size_t size() const { return depth.size(); }
};

/// Forward differences: gx[n] = x[n+Ny] - x[n] (next column), gy[n] =
/// x[n+1] - x[n] (next row); zero on the last column / last row.
inline std::pair<DenseDepthMap, DenseDepthMap> gradient(const DenseDepthMap& x) {
  const int ny = x.height, nx = x.width;
  DenseDepthMap gx(nx, ny), gy(nx, ny);
  for (int c = 0; c < nx; ++c) {
    for (int r = 0; r < ny; ++r) {
      const std::size_t n = x.idx(r, c);
      if (c + 1 < nx) gx.depth[n] = x.depth[n + ny] - x.depth[n];
      if (r + 1 < ny) gy.depth[n] = x.depth[n + 1] - x.depth[n];
    }
  }
  return {std::move(gx), std::move(gy)};
}

/// Anisotropic l1 gradient cost |Dx x|_1 + |Dy x|_1.
inline double objective_f(const DenseDepthMap& x) {
  const int ny = x.height, nx = x.width;
  double f = 0.0;
  for (int c = 0; c < nx; ++c) {
    for (int r = 0; r < ny; ++r) {
      const std::size_t n = x.idx(r, c);
      if (c + 1 < nx) f += std::abs(x.depth[n + ny] - x.depth[n]);
      if (r + 1 < ny) f += std::abs(x.depth[n + 1] - x.depth[n]);
    }
  }
  return f;
}

/// Elementwise sgn(v) * max(|v| - tau, 0).
inline std::vector<double> soft_threshold(const std::vector<double>& v, double tau) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - tau;
    out[i] = a > 0.0 ? (v[i] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

enum class InitFill {
  kNearestNeighbor,  // propagate support values along the grid (default)
  kZero,             // literal s0 = y with zeros off support
};

struct UpsampleOptions {
  double gamma = 0.1;          // subgradient step, meters
  double tau = 0.0;            // pixel-domain soft threshold of the z-update
  int max_iters = 400;
  double stop_rel_tol = 1e-5;  // <= 0 disables the early stop
  InitFill init_fill = InitFill::kNearestNeighbor;
};

namespace detail {

// Level-synchronous 4-neighbor propagation from the support set, resolving
// multi-source arrivals with min. Order-free, so equivariant under flips.
inline std::vector<double> nearest_fill(const SparseDepthMap& y) {
  const int ny = y.height, nx = y.width;
  std::vector<double> val(y.size(), std::numeric_limits<double>::infinity());
  std::vector<std::uint8_t> settled(y.size(), 0);
  std::vector<std::size_t> frontier;
  for (std::size_t n = 0; n < y.size(); ++n) {
    if (y.support[n]) {
      val[n] = y.depth[n];
      settled[n] = 1;
      frontier.push_back(n);
    }
  }
  std::vector<std::size_t> next;
  while (!frontier.empty()) {
    next.clear();
    for (std::size_t n : frontier) {
      const int r = static_cast<int>(n % ny), c = static_cast<int>(n / ny);
      const std::size_t nb[4] = {r > 0 ? n - 1 : n, r + 1 < ny ? n + 1 : n,
                                 c > 0 ? n - ny : n, c + 1 < nx ? n + ny : n};
      for (std::size_t q : nb) {
        if (settled[q]) continue;
        if (val[q] == std::numeric_limits<double>::infinity()) next.push_back(q);
        val[q] = std::min(val[q], val[n]);
      }
    }
    for (std::size_t q : next) settled[q] = 1;
    frontier.swap(next);
  }
  return val;
}

// Subgradient of the anisotropic l1 gradient cost with sgn(0) = 0:
// g = Dx^T sgn(Dx x) + Dy^T sgn(Dy x).
inline void l1_subgradient(const std::vector<double>& x, int ny, int nx,
                           std::vector<double>& g) {
  auto sgn = [](double d) { return (d > 0.0) - (d < 0.0); };
  for (int c = 0; c < nx; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * ny;
    for (int r = 0; r < ny; ++r) {
      const std::size_t n = base + r;
      int acc = 0;
      if (c + 1 < nx) acc -= sgn(x[n + ny] - x[n]);
      if (c > 0) acc += sgn(x[n] - x[n - ny]);
      if (r + 1 < ny) acc -= sgn(x[n + 1] - x[n]);
      if (r > 0) acc += sgn(x[n] - x[n - 1]);
      g[n] = acc;
    }
  }
}

}  // namespace detail

/// Fill the unsupported pixels of a sparse depth map by minimizing the
/// anisotropic l1 gradient cost with Nesterov-accelerated projected
/// subgradient steps. Supported pixels are held fixed throughout and the
/// result equals the input bit-exactly on the support. The returned trace
/// holds the cost of the feasible iterate at every iteration.
inline std::pair<DenseDepthMap, std::vector<double>> upsample(
    const SparseDepthMap& y, const UpsampleOptions& opts = {}) {
  const std::size_t n_support = y.support_count();
  if (n_support == 0) throw EmptySupport("upsample: no supported pixels");

  const int ny = y.height, nx = y.width;
  const std::size_t n = y.size();

  DenseDepthMap out(nx, ny);
  std::vector<double> trace;

  if (n_support == n) {  // nothing to fill
    out.depth = y.depth;
    return {std::move(out), std::move(trace)};
  }

  std::vector<double> s = opts.init_fill == InitFill::kNearestNeighbor
                              ? detail::nearest_fill(y)
                              : [&] {
                                  std::vector<double> v(n, 0.0);
                                  for (std::size_t i = 0; i < n; ++i)
                                    if (y.support[i]) v[i] = y.depth[i];
                                  return v;
                                }();
  std::vector<double> z = s, z_prev = s, g(n, 0.0);

  double q_prev = 1.0;
  double f_prev = std::numeric_limits<double>::infinity();
  trace.reserve(opts.max_iters);

  for (int t = 1; t <= opts.max_iters; ++t) {
    detail::l1_subgradient(s, ny, nx, g);

    for (std::size_t i = 0; i < n; ++i) {
      if (y.support[i]) continue;
      double v = s[i] - opts.gamma * g[i];
      if (opts.tau > 0.0) {
        const double a = std::abs(v) - opts.tau;
        v = a > 0.0 ? (v > 0.0 ? a : -a) : 0.0;
      }
      z[i] = v;
    }

    const double q = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * q_prev * q_prev));
    const double lambda = (q_prev - 1.0) / q;
    // (1+lambda) z - lambda z_prev, written so exact fixed points stay exact.
    for (std::size_t i = 0; i < n; ++i) {
      if (y.support[i]) continue;
      s[i] = z[i] + lambda * (z[i] - z_prev[i]);
    }
    z_prev = z;
    q_prev = q;

    // Cost of the current feasible estimate (z off support, y on it).
    double f = 0.0;
    {
      const std::vector<double>& xc = z;
      for (int c = 0; c < nx; ++c) {
        const std::size_t base = static_cast<std::size_t>(c) * ny;
        for (int r = 0; r < ny; ++r) {
          const std::size_t m = base + r;
          const double xm = y.support[m] ? y.depth[m] : xc[m];
          if (c + 1 < nx) {
            const std::size_t mr = m + ny;
            f += std::abs((y.support[mr] ? y.depth[mr] : xc[mr]) - xm);
          }
          if (r + 1 < ny) {
            const std::size_t md = m + 1;
            f += std::abs((y.support[md] ? y.depth[md] : xc[md]) - xm);
          }
        }
      }
    }
    trace.push_back(f);

    if (opts.stop_rel_tol > 0.0 && t > 1) {
      const double denom = std::max(std::abs(f_prev), 1e-12);
      if (std::abs(f - f_prev) / denom < opts.stop_rel_tol) break;
    }
    f_prev = f;
  }

  out.depth = z_prev;
  for (std::size_t i = 0; i < n; ++i)
    if (y.support[i]) out.depth[i] = y.depth[i];
  return {std::move(out), std::move(trace)};
}

}  // namespace mocal
