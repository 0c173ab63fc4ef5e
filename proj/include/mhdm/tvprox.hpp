#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"

namespace mhdm {

struct ProxParams {
  double weight_kappa = 1.0;
  int max_iters = 500;
  double tol = 1e-6;  ///< target RMS distance to the exact minimizer
};

struct ProxResult {
  ImageGrid psi;
  int iterations = 0;
  double error_bound = std::numeric_limits<double>::infinity();  ///< certified RMS error
  bool converged = false;
};

/// Dual field p = (px, py) with |p| <= 1 pointwise. Keeping one across calls
/// warm-starts the next prox.
struct ProxDual {
  ImageGrid px, py;
};

namespace detail {

// Forward-difference gradient (zero across the far edge) and its negative
// adjoint, the backward divergence.
inline void prox_gradient(const ImageGrid& u, ImageGrid& gx, ImageGrid& gy) {
  const std::size_t w = u.width(), h = u.height();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double here = u(r, c);
      gx(r, c) = c + 1 < w ? u(r, c + 1) - here : 0.0;
      gy(r, c) = r + 1 < h ? u(r + 1, c) - here : 0.0;
    }
  }
}

inline void prox_divergence(const ImageGrid& px, const ImageGrid& py, ImageGrid& out) {
  const std::size_t w = px.width(), h = px.height();
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double v = 0.0;
      if (c + 1 < w) v += px(r, c);
      if (c > 0) v -= px(r, c - 1);
      if (r + 1 < h) v += py(r, c);
      if (r > 0) v -= py(r - 1, c);
      out(r, c) = v;
    }
  }
}

}  // namespace detail

/// arg min_psi TV(psi) + kappa/2 ||psi - v||^2 with isotropic TV.
///
/// Fast gradient projection on the dual: psi = v + div(p)/kappa. The duality
/// gap sum(|grad psi| - grad psi . p) bounds kappa/2 ||psi - psi*||^2, so
/// stopping once gap/N <= kappa tol^2 / 2 certifies an RMS error <= tol.
inline ProxResult tv_prox_solve(const ImageGrid& v, const ProxParams& params, ProxDual* warm = nullptr) {
  if (!(params.weight_kappa > 0.0)) throw ValidationError("tv_prox: weight_kappa must be > 0");
  if (!(params.tol > 0.0) || params.max_iters < 0) throw ValidationError("tv_prox: bad tolerance or iteration cap");
  const std::size_t w = v.width(), h = v.height(), n = v.size();
  const double kappa = params.weight_kappa;
  const double step = kappa / 8.0;
  const double gap_target = 0.5 * kappa * params.tol * params.tol * static_cast<double>(n);

  ImageGrid px(w, h), py(w, h);
  if (warm && warm->px.same_shape(v) && warm->py.same_shape(v)) {
    px = warm->px;
    py = warm->py;
  }
  ImageGrid rx = px, ry = py, prev_x(w, h), prev_y(w, h);
  ImageGrid div(w, h), gx(w, h), gy(w, h), psi(w, h);
  double t = 1.0;

  auto primal = [&](const ImageGrid& ax, const ImageGrid& ay) {
    detail::prox_divergence(ax, ay, div);
    for (std::size_t i = 0; i < n; ++i) psi[i] = v[i] + div[i] / kappa;
  };
  auto gap = [&]() {
    primal(px, py);
    detail::prox_gradient(psi, gx, gy);
    double g = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      g += std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]) - (gx[i] * px[i] + gy[i] * py[i]);
    }
    return std::max(g, 0.0);
  };

  ProxResult result;
  double g = gap();
  int it = 0;
  while (g > gap_target && it < params.max_iters) {
    primal(rx, ry);
    detail::prox_gradient(psi, gx, gy);
    prev_x = px;
    prev_y = py;
    for (std::size_t i = 0; i < n; ++i) {
      const double ax = rx[i] + step * gx[i];
      const double ay = ry[i] + step * gy[i];
      const double m = std::max(1.0, std::sqrt(ax * ax + ay * ay));
      px[i] = ax / m;
      py[i] = ay / m;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) {
      rx[i] = px[i] + beta * (px[i] - prev_x[i]);
      ry[i] = py[i] + beta * (py[i] - prev_y[i]);
    }
    t = t_next;
    ++it;
    if (it % 10 == 0 || it == params.max_iters) g = gap();
  }
  primal(px, py);

  result.psi = psi;
  result.iterations = it;
  result.error_bound = std::sqrt(2.0 * g / (kappa * static_cast<double>(n)));
  result.converged = g <= gap_target;
  if (!result.psi.all_finite()) throw NumericalError("tv_prox: non-finite iterate");
  if (warm) {
    warm->px = std::move(px);
    warm->py = std::move(py);
  }
  return result;
}

inline ImageGrid tv_prox(const ImageGrid& v, const ProxParams& params) { return tv_prox_solve(v, params).psi; }

}  // namespace mhdm
