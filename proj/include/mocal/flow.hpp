#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mocal/errors.hpp"
#include "mocal/geometry.hpp"
#include "mocal/image.hpp"

namespace mocal {

/// Dense per-pixel motion a -> b in pixels/frame, row-major like GrayImage.
struct FlowField2D {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField2D() = default;
  FlowField2D(int w, int h)
      : width(w), height(h), u(static_cast<std::size_t>(w) * h, 0.0f),
        v(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

struct FlowOptions {
  double lambda = 0.15;  // data term weight (0-255 intensity units)
  double theta = 0.3;    // coupling between data and TV terms
  double tau = 0.25;     // dual ascent step
  double pyramid_scale = 0.5;
  int warps = 5;
  int inner_iters = 30;
  int min_coarse_dim = 16;  // coarsest pyramid level keeps min dim >= this
  int downscale_levels = 0;  // skip this many fine levels, upscale the result
};

/// Bilinear flow lookup. Throws OutOfBounds outside [0,w) x [0,h).
inline std::pair<double, double> sample_flow(const FlowField2D& f, const PixelCoord& at) {
  if (at.u < 0.0 || at.u >= f.width || at.v < 0.0 || at.v >= f.height)
    throw OutOfBounds("sample_flow: pixel outside the flow field");
  int x0 = static_cast<int>(at.u), y0 = static_cast<int>(at.v);
  if (x0 > f.width - 2) x0 = f.width - 2;
  if (y0 > f.height - 2) y0 = f.height - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const int x1 = x0 + 1 < f.width ? x0 + 1 : x0;
  const int y1 = y0 + 1 < f.height ? y0 + 1 : y0;
  const double ax = at.u - x0, ay = at.v - y0;
  auto lerp2 = [&](const std::vector<float>& c) {
    const double top = (1.0 - ax) * c[f.idx(x0, y0)] + ax * c[f.idx(x1, y0)];
    const double bot = (1.0 - ax) * c[f.idx(x0, y1)] + ax * c[f.idx(x1, y1)];
    return (1.0 - ay) * top + ay * bot;
  };
  return {lerp2(f.u), lerp2(f.v)};
}

namespace detail {

inline GrayImage gaussian_smooth(const GrayImage& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.5 * sigma));
  std::vector<float> kern(2 * radius + 1);
  float sum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    kern[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    sum += kern[i + radius];
  }
  for (float& k : kern) k /= sum;

  GrayImage tmp(in.width, in.height), out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        int xx = std::clamp(x + i, 0, in.width - 1);
        acc += kern[i + radius] * in.at(xx, y);
      }
      tmp.at(x, y) = acc;
    }
  }
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      float acc = 0.0f;
      for (int i = -radius; i <= radius; ++i) {
        int yy = std::clamp(y + i, 0, in.height - 1);
        acc += kern[i + radius] * tmp.at(x, yy);
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline GrayImage downsample_half(const GrayImage& in) {
  const GrayImage sm = gaussian_smooth(in, 0.8);
  GrayImage out((in.width + 1) / 2, (in.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.at(x, y) = sm.at(std::min(2 * x, in.width - 1), std::min(2 * y, in.height - 1));
  return out;
}

// Central differences, replicated borders.
inline void image_gradient(const GrayImage& img, GrayImage& gx, GrayImage& gy) {
  const int w = img.width, h = img.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xm = x > 0 ? x - 1 : 0, xp = x + 1 < w ? x + 1 : w - 1;
      const int ym = y > 0 ? y - 1 : 0, yp = y + 1 < h ? y + 1 : h - 1;
      gx.at(x, y) = 0.5f * (img.at(xp, y) - img.at(xm, y));
      gy.at(x, y) = 0.5f * (img.at(x, yp) - img.at(x, ym));
    }
  }
}

// One pyramid level of the duality-based TV-L1 update. Flow fields are
// modified in place.
inline void tv_l1_level(const GrayImage& i0, const GrayImage& i1,
                        std::vector<float>& u1, std::vector<float>& u2,
                        const FlowOptions& opts) {
  const int w = i0.width, h = i0.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  // The published lambda default is calibrated for 0-255 intensities; with
  // [0,1] samples the same behavior needs lambda*theta scaled by 255.
  const float l_t = static_cast<float>(opts.lambda * opts.theta * 255.0);
  const float theta = static_cast<float>(opts.theta);
  const float taut = static_cast<float>(opts.tau / opts.theta);

  GrayImage i1x(w, h), i1y(w, h);
  image_gradient(i1, i1x, i1y);

  std::vector<float> i1w(n), i1wx(n), i1wy(n), rho_c(n), grad(n);
  std::vector<float> v1(n), v2(n);
  std::vector<float> p11(n, 0.0f), p12(n, 0.0f), p21(n, 0.0f), p22(n, 0.0f);
  std::vector<float> div_p(n);

  for (int warp = 0; warp < opts.warps; ++warp) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t k = static_cast<std::size_t>(y) * w + x;
        const double xx = x + u1[k], yy = y + u2[k];
        i1w[k] = sample_bilinear(i1, xx, yy);
        i1wx[k] = sample_bilinear(i1x, xx, yy);
        i1wy[k] = sample_bilinear(i1y, xx, yy);
        grad[k] = i1wx[k] * i1wx[k] + i1wy[k] * i1wy[k];
        rho_c[k] = i1w[k] - i1wx[k] * u1[k] - i1wy[k] * u2[k] - i0.samples[k];
      }
    }

    for (int it = 0; it < opts.inner_iters; ++it) {
      // v update: pointwise threshold on the linearized residual.
      for (std::size_t k = 0; k < n; ++k) {
        const float rho = rho_c[k] + i1wx[k] * u1[k] + i1wy[k] * u2[k];
        float d1 = 0.0f, d2 = 0.0f;
        const float thresh = l_t * grad[k];
        if (rho < -thresh) {
          d1 = l_t * i1wx[k];
          d2 = l_t * i1wy[k];
        } else if (rho > thresh) {
          d1 = -l_t * i1wx[k];
          d2 = -l_t * i1wy[k];
        } else if (grad[k] > 1e-12f) {
          d1 = -rho * i1wx[k] / grad[k];
          d2 = -rho * i1wy[k] / grad[k];
        }
        v1[k] = u1[k] + d1;
        v2[k] = u2[k] + d2;
      }

      // u update from the divergence of the dual field.
      auto divergence = [&](const std::vector<float>& px, const std::vector<float>& py) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            float d = 0.0f;
            if (x == 0) d += px[k];
            else if (x == w - 1) d -= px[k - 1];
            else d += px[k] - px[k - 1];
            if (y == 0) d += py[k];
            else if (y == h - 1) d -= py[k - w];
            else d += py[k] - py[k - w];
            div_p[k] = d;
          }
        }
      };
      divergence(p11, p12);
      for (std::size_t k = 0; k < n; ++k) u1[k] = v1[k] + theta * div_p[k];
      divergence(p21, p22);
      for (std::size_t k = 0; k < n; ++k) u2[k] = v2[k] + theta * div_p[k];

      // dual ascent with reprojection onto the unit ball.
      auto dual_update = [&](const std::vector<float>& u, std::vector<float>& px,
                             std::vector<float>& py) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            const float ux = x + 1 < w ? u[k + 1] - u[k] : 0.0f;
            const float uy = y + 1 < h ? u[k + w] - u[k] : 0.0f;
            const float norm = 1.0f + taut * std::sqrt(ux * ux + uy * uy);
            px[k] = (px[k] + taut * ux) / norm;
            py[k] = (py[k] + taut * uy) / norm;
          }
        }
      };
      dual_update(u1, p11, p12);
      dual_update(u2, p21, p22);
    }
  }
}

}  // namespace detail

/// Dense TV-L1 optical flow (duality-based, coarse-to-fine). Deterministic
/// for fixed options; identical inputs give an exactly zero field.
inline FlowField2D tv_l1_flow(const GrayImage& a, const GrayImage& b,
                              const FlowOptions& opts = {}) {
  if (!a.same_size(b))
    throw DimensionMismatch("tv_l1_flow: image dimensions differ");
  if (std::min(a.width, a.height) < opts.min_coarse_dim)
    throw TooSmall("tv_l1_flow: min dimension below " +
                   std::to_string(opts.min_coarse_dim));

  // Pyramid, finest first; coarsest level keeps min dimension >= threshold.
  std::vector<GrayImage> pyr_a{a}, pyr_b{b};
  while (true) {
    const GrayImage& last = pyr_a.back();
    const int nw = (last.width + 1) / 2, nh = (last.height + 1) / 2;
    if (std::min(nw, nh) < opts.min_coarse_dim) break;
    pyr_a.push_back(detail::downsample_half(pyr_a.back()));
    pyr_b.push_back(detail::downsample_half(pyr_b.back()));
  }

  const int n_levels = static_cast<int>(pyr_a.size());
  const int finest = std::min(opts.downscale_levels, n_levels - 1);

  FlowField2D flow(pyr_a[n_levels - 1].width, pyr_a[n_levels - 1].height);
  for (int level = n_levels - 1; level >= finest; --level) {
    const GrayImage& la = pyr_a[level];
    const GrayImage& lb = pyr_b[level];
    if (level != n_levels - 1) {
      // Upscale flow from the previous (coarser) level.
      FlowField2D up(la.width, lb.height);
      const FlowField2D& prev = flow;
      for (int y = 0; y < up.height; ++y) {
        for (int x = 0; x < up.width; ++x) {
          const double sx = std::min(x * 0.5, prev.width - 1.0);
          const double sy = std::min(y * 0.5, prev.height - 1.0);
          const auto [fu, fv] = sample_flow(prev, PixelCoord{sx, sy});
          up.u[up.idx(x, y)] = static_cast<float>(2.0 * fu);
          up.v[up.idx(x, y)] = static_cast<float>(2.0 * fv);
        }
      }
      flow = std::move(up);
    }
    detail::tv_l1_level(la, lb, flow.u, flow.v, opts);
  }

  // If fine levels were skipped, upscale the result to full resolution.
  while (flow.width != a.width || flow.height != a.height) {
    const int tw = std::min(flow.width * 2, a.width);
    const int th = std::min(flow.height * 2, a.height);
    FlowField2D up(tw, th);
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) {
        const double sx = std::min(x * 0.5, flow.width - 1.0);
        const double sy = std::min(y * 0.5, flow.height - 1.0);
        const auto [fu, fv] = sample_flow(flow, PixelCoord{sx, sy});
        up.u[up.idx(x, y)] = static_cast<float>(2.0 * fu);
        up.v[up.idx(x, y)] = static_cast<float>(2.0 * fv);
      }
    }
    flow = std::move(up);
  }
  return flow;
}

}  // namespace mocal
