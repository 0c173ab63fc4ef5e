#pragma once

#include <algorithm>
#include <cmath>

#include "mhdm/error.hpp"
#include "mhdm/functionals.hpp"
#include "mhdm/grid.hpp"
#include "mhdm/metrics.hpp"
#include "mhdm/operators.hpp"
#include "mhdm/solvers/params.hpp"

namespace mhdm {

/// Single-level comparison model: lambda TV(u) + mean(log Tu + f/Tu) +
/// alpha mean(sqrt(Tu/f) - 1)^2. Intensities are divided by `intensity_scale`
/// before solving (lambda is calibrated for data in [0, 1]) and multiplied
/// back afterwards.
struct DZParams {
  double lambda = 0.06;
  double alpha = 16.0;
  double intensity_scale = 255.0;
};

namespace detail {

inline double dz_d1(double f, double s, double alpha) {
  return 1.0 / s - f / (s * s) + alpha * (1.0 / f - 1.0 / std::sqrt(s * f));
}

inline double dz_d2(double f, double s, double alpha) {
  return std::max(0.0, (2.0 * f / s - 1.0) / (s * s)) + alpha / (2.0 * std::sqrt(f) * s * std::sqrt(s));
}

}  // namespace detail

inline double dz_energy(const ImageGrid& f_scaled, const BlurOperator& T, const ImageGrid& u_scaled, double lambda,
                        double alpha, double eps) {
  const ImageGrid s = apply(T, u_scaled);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = std::sqrt(s[i] / f_scaled[i]) - 1.0;
    acc += std::log(s[i]) + f_scaled[i] / s[i] + alpha * r * r;
  }
  return lambda * tv(u_scaled, eps) + acc / static_cast<double>(s.size());
}

/// Semi-implicit gradient descent from u = f; same stabilization as the
/// multiplicative MHDM flows.
inline ImageGrid dz_solve(const ImageGrid& f_delta, const BlurOperator& T, const DZParams& dz,
                          const SolverParams& params) {
  params.validate();
  require_positive(f_delta, "dz_solve");
  if (!(dz.lambda > 0.0) || !(dz.intensity_scale > 0.0)) throw ValidationError("dz_solve: lambda and scale must be > 0");
  if (!(dz.alpha >= 2.0 * std::sqrt(6.0) / 9.0)) throw ValidationError("dz_solve: alpha below the convexity bound 2 sqrt(6)/9");
  const double scale = dz.intensity_scale;
  const ImageGrid f = f_delta * (1.0 / scale);
  ImageGrid u = f;
  const std::size_t n = u.size();
  const bool identity = T.is_identity();
  const double dt = params.dt, lam = dz.lambda;

  ImageGrid d, chi, diag, hp(u.width(), u.height()), hpp(u.width(), u.height()), grad, curv, next(u.width(), u.height());
  for (int it = 0; it < params.max_iters; ++it) {
    const ImageGrid s = identity ? u : apply(T, u);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(s[i] > 0.0)) throw NumericalError("dz_solve: nonpositive Tu at pixel " + std::to_string(i));
      hp[i] = detail::dz_d1(f[i], s[i], dz.alpha);
      hpp[i] = detail::dz_d2(f[i], s[i], dz.alpha);
    }
    grad = identity ? hp : apply_adjoint(T, hp);
    if (params.stabilize_fidelity) curv = identity ? hpp : apply_adjoint_squared(T, hpp);
    stencil_weight_d(u, params.eps, false, d);
    stencil_chi(d, u, chi);
    stencil_diag(d, diag);
    for (std::size_t i = 0; i < n; ++i) {
      const double force = -grad[i];
      double num = u[i] + dt * lam * chi[i];
      double den = 1.0 + dt * lam * diag[i];
      if (params.stabilize_fidelity) {
        num += dt * (curv[i] * u[i] + std::max(force, 0.0));
        den += dt * (curv[i] + std::max(-force, 0.0) / u[i]);
      } else {
        num += dt * force;
      }
      next[i] = num / den;
    }
    std::swap(u, next);
    detail::check_positive_iterate(u, it, "dz_solve");
    if (params.observer) params.observer(it, u);
  }
  return u * scale;
}

struct DZSearchResult {
  double lambda = 0.0;
  double snr = 0.0;
  ImageGrid restored;
};

/// Best lambda on {0.01, 0.02, ..., 0.20} by SNR against `truth` (both in the
/// same, shifted, intensity frame as f_delta).
inline DZSearchResult dz_grid_search(const ImageGrid& f_delta, const BlurOperator& T, const ImageGrid& truth,
                                     DZParams dz, const SolverParams& params, double shift = 0.0) {
  DZSearchResult best;
  best.snr = -std::numeric_limits<double>::infinity();
  const ImageGrid z = truth - shift;
  for (int step = 1; step <= 20; ++step) {
    dz.lambda = 0.01 * step;
    ImageGrid x = dz_solve(f_delta, T, dz, params);
    const double value = snr(x - shift, z);
    if (value > best.snr) {
      best.snr = value;
      best.lambda = dz.lambda;
      best.restored = std::move(x);
    }
  }
  return best;
}

}  // namespace mhdm
