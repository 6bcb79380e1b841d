#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "mocal/errors.hpp"
#include "mocal/geometry.hpp"

namespace mocal {

struct SimplexOptions {
  CalibParams init;
  double init_spread = 0.2;  // fraction of the per-axis scale below
  int max_iters = 500;
  double f_tol = 1e-10;
  double x_tol = 1e-6;
  std::uint64_t rng_seed = 0;
  // Converged-but-poor restart: rebuild the simplex once around the best
  // vertex when the converged cost exceeds this.
  double restart_threshold = std::numeric_limits<double>::infinity();
};

struct NelderMeadResult {
  CalibParams theta;
  double cost = 0.0;
  int iters = 0;
  bool converged = false;
  std::vector<double> trace;  // best cost per iteration
};

namespace detail {

// Per-axis simplex scale: 20 degrees for the angles, 2 m for translations.
inline Eigen::Matrix<double, 6, 1> simplex_axis_scale() {
  Eigen::Matrix<double, 6, 1> s;
  const double ang = 20.0 * std::numbers::pi / 180.0;
  s << ang, ang, ang, 2.0, 2.0, 2.0;
  return s;
}

}  // namespace detail

/// Derivative-free simplex minimization (Nelder-Mead with the standard
/// reflection/expansion/contraction/shrink coefficients 1, 2, 0.5, 0.5).
/// The initial simplex is the init point plus six axis-perturbed copies
/// with random signs and magnitudes in [0.5, 1] * init_spread * axis scale.
inline NelderMeadResult nelder_mead(
    const std::function<double(const CalibParams&)>& f,
    const SimplexOptions& opts) {
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  constexpr int dim = 6;
  constexpr int nv = dim + 1;

  std::mt19937_64 rng(opts.rng_seed);
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);

  const Vec6 scale = detail::simplex_axis_scale();

  auto eval = [&](const Vec6& x) {
    const double v = f(CalibParams::from_vector(x));
    if (!std::isfinite(v))
      throw NonFiniteObjective("nelder_mead: objective returned a non-finite value");
    return v;
  };

  auto build_simplex = [&](const Vec6& center, std::vector<Vec6>& xs) {
    xs.assign(nv, center);
    for (int j = 0; j < dim; ++j) {
      const double sign = coin(rng) ? 1.0 : -1.0;
      xs[j + 1][j] += sign * mag(rng) * opts.init_spread * scale[j];
    }
  };

  std::vector<Vec6> xs;
  std::vector<double> fs(nv);
  build_simplex(opts.init.to_vector(), xs);
  for (int i = 0; i < nv; ++i) fs[i] = eval(xs[i]);

  NelderMeadResult result;
  bool restarted = false;
  int iters = 0;

  auto order = [&] {
    std::vector<int> idx(nv);
    for (int i = 0; i < nv; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
    std::vector<Vec6> xs2(nv);
    std::vector<double> fs2(nv);
    for (int i = 0; i < nv; ++i) {
      xs2[i] = xs[idx[i]];
      fs2[i] = fs[idx[i]];
    }
    xs.swap(xs2);
    fs.swap(fs2);
  };

  auto converged = [&] {
    double diam = 0.0;
    for (int i = 1; i < nv; ++i)
      diam = std::max(diam, (xs[i] - xs[0]).cwiseAbs().maxCoeff());
    return diam < opts.x_tol && (fs[nv - 1] - fs[0]) < opts.f_tol;
  };

  while (iters < opts.max_iters) {
    order();
    result.trace.push_back(fs[0]);
    ++iters;

    if (converged()) {
      if (!restarted && fs[0] > opts.restart_threshold) {
        restarted = true;
        build_simplex(xs[0], xs);
        for (int i = 0; i < nv; ++i) fs[i] = eval(xs[i]);
        continue;
      }
      result.converged = true;
      break;
    }

    Vec6 centroid = Vec6::Zero();
    for (int i = 0; i < dim; ++i) centroid += xs[i];
    centroid /= dim;

    const Vec6 xr = centroid + (centroid - xs[nv - 1]);
    const double fr = eval(xr);

    if (fr < fs[0]) {
      const Vec6 xe = centroid + 2.0 * (xr - centroid);
      const double fe = eval(xe);
      if (fe < fr) {
        xs[nv - 1] = xe;
        fs[nv - 1] = fe;
      } else {
        xs[nv - 1] = xr;
        fs[nv - 1] = fr;
      }
    } else if (fr < fs[nv - 2]) {
      xs[nv - 1] = xr;
      fs[nv - 1] = fr;
    } else if (fr < fs[nv - 1]) {
      const Vec6 xc = centroid + 0.5 * (xr - centroid);  // outside contraction
      const double fc = eval(xc);
      if (fc <= fr) {
        xs[nv - 1] = xc;
        fs[nv - 1] = fc;
      } else {
        for (int i = 1; i < nv; ++i) {  // shrink
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = eval(xs[i]);
        }
      }
    } else {
      const Vec6 xc = centroid - 0.5 * (centroid - xs[nv - 1]);  // inside contraction
      const double fc = eval(xc);
      if (fc < fs[nv - 1]) {
        xs[nv - 1] = xc;
        fs[nv - 1] = fc;
      } else {
        for (int i = 1; i < nv; ++i) {
          xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
          fs[i] = eval(xs[i]);
        }
      }
    }
  }

  order();
  result.theta = CalibParams::from_vector(xs[0]);
  result.cost = fs[0];
  result.iters = iters;
  if (result.trace.empty() || result.trace.back() > fs[0]) result.trace.push_back(fs[0]);
  return result;
}

}  // namespace mocal
