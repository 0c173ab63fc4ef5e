#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "mhdm/error.hpp"
#include "mhdm/functionals.hpp"
#include "mhdm/grid.hpp"
#include "mhdm/operators.hpp"
#include "mhdm/solvers/initialize.hpp"
#include "mhdm/solvers/params.hpp"
#include "mhdm/tvprox.hpp"

namespace mhdm {

/// Per-scale convergence information filled by the solvers on request.
struct SolveReport {
  int iterations = 0;
  bool converged = true;
  double final_change = 0.0;  ///< ADMM: max of the monitored squared changes
  int prox_failures = 0;      ///< ADMM: prox calls that hit their iteration cap
};

namespace detail {

inline ImageGrid log_state(const ImageGrid& f, const ScaleState& state) {
  return state.y_prev.empty() ? ImageGrid(f.width(), f.height(), 0.0) : state.y_prev;
}

}  // namespace detail

/// lambda_k H_SO(f, w + y) + TV_eps(w) + lambda_k a_k TV_eps(w + y), the
/// objective the SO Euler-Lagrange flow descends (regular: a_k = 0).
inline double so_energy(const ImageGrid& f_delta, const ImageGrid& y_prev, const ImageGrid& w,
                        const SolverParams& params) {
  const ImageGrid z = w + y_prev;
  double e = params.lambda_k * fidelity(FidelityKind::SOExponential, f_delta, z) + tv(w, params.eps);
  if (params.ak_lambda_k > 0.0) e += params.ak_lambda_k * tv(z, params.eps);
  return e;
}

/// Semi-implicit time stepping of the SO Euler-Lagrange flow for w_k.
inline ImageGrid so_solve_el(const ImageGrid& f_delta, const ScaleState& state, Variant variant,
                             const SolverParams& params, SolveReport* report = nullptr) {
  params.validate();
  require_positive(f_delta, "so_solve_el");
  const ImageGrid y = detail::log_state(f_delta, state);
  require_same_shape(f_delta, y, "so_solve_el");
  ScaleState st = state;
  st.y_prev = y;
  ImageGrid w = initialize(Model::SO, variant, f_delta, st, BlurOperator{}, params.init);

  const std::size_t n = w.size();
  const double dt = params.dt, lam = params.lambda_k;
  const double la = variant == Variant::Regular ? 0.0 : params.ak_lambda_k;
  const bool refined = variant == Variant::Refined;

  std::unique_ptr<StarNormAscent> ascent;
  if (refined) ascent = std::make_unique<StarNormAscent>(w.width(), w.height(), params.eps, dt, params.phi_seed);

  ImageGrid d, chi, diag, z, dz, chiz, diagz, next(w.width(), w.height());
  for (int it = 0; it < params.max_iters; ++it) {
    if (!refined) {
      stencil_weight_d(w, params.eps, false, d);
      stencil_chi(d, w, chi);
      stencil_diag(d, diag);
    }
    if (la > 0.0) {
      z = w + y;
      stencil_weight_d(z, params.eps, false, dz);
      stencil_chi(dz, z, chiz);
      stencil_diag(dz, diagz);
    }
    double star_scale = 0.0;
    if (refined) {
      ascent->step(w);
      star_scale = ascent->mean_energy_scale();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double e = f_delta[i] * std::exp(-(w[i] + y[i]));
      double num = w[i] - dt * lam * (1.0 - e);
      double den = 1.0;
      if (refined) {
        num -= dt * ascent->phi()[i] * star_scale;
      } else {
        num += dt * chi[i];
        den += dt * diag[i];
      }
      if (la > 0.0) {
        num += dt * la * (chiz[i] - diagz[i] * y[i]);
        den += dt * la * diagz[i];
      }
      if (params.stabilize_fidelity) {
        const double c = lam * e;
        num += dt * c * w[i];
        den += dt * c;
      }
      next[i] = num / den;
    }
    std::swap(w, next);
    detail::check_iterate(w, it, "so_solve_el");
    if (params.observer) params.observer(it, w);
  }
  if (report) {
    report->iterations = params.max_iters;
    report->converged = true;
  }
  return w;
}

namespace detail {

/// Root of lambda (1 - f e^{-(theta + y)}) + rho (theta - t) = 0. The left side
/// is increasing and concave in theta, and the root lies between t and
/// log f - y, so Newton is safeguarded by bisection on that bracket.
inline double so_theta_newton(double f, double y, double t, double start, double lam, double rho, double tol,
                              int max_steps, std::size_t pixel) {
  const double tf = std::log(f) - y;
  double lo = std::min(t, tf), hi = std::max(t, tf);
  if (hi - lo <= tol) return 0.5 * (lo + hi);
  double theta = std::clamp(start, lo, hi);
  for (int s = 0; s < max_steps; ++s) {
    const double e = f * std::exp(-(theta + y));
    const double g = lam * (1.0 - e) + rho * (theta - t);
    if (g == 0.0) return theta;
    if (g > 0.0) hi = theta; else lo = theta;
    const double gp = lam * e + rho;
    double next = theta - g / gp;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - theta) < tol || hi - lo < tol) return next;
    theta = next;
  }
  throw NumericalError("so_solve_admm: Newton theta-step did not converge at pixel " + std::to_string(pixel));
}

inline double max_sq_diff(const ImageGrid& a, const ImageGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m * m;
}

}  // namespace detail

/// ADMM for the SO scale problem: pointwise Newton theta-step, TV-prox psi
/// step(s) and the scaled dual update. Stops once the largest squared change
/// of theta, the dual, psi and the consensus gap theta - psi, measured in the
/// sup norm, drops below admm_tol, or after max_iters iterations.
inline ImageGrid so_solve_admm(const ImageGrid& f_delta, const ScaleState& state, Variant variant,
                               const SolverParams& params, SolveReport* report = nullptr) {
  params.validate();
  if (variant == Variant::Refined) throw ValidationError("so_solve_admm: refined variant has no ADMM form");
  require_positive(f_delta, "so_solve_admm");
  const ImageGrid y = detail::log_state(f_delta, state);
  require_same_shape(f_delta, y, "so_solve_admm");
  ScaleState st = state;
  st.y_prev = y;

  const bool tight = variant == Variant::Tight;
  const bool consensus = tight && params.admm_coupling == AdmmCoupling::Consensus;
  const double lam = params.lambda_k, rho = params.rho, la = params.ak_lambda_k;
  const std::size_t w = f_delta.width(), h = f_delta.height(), n = f_delta.size();

  ImageGrid theta = initialize(Model::SO, variant, f_delta, st, BlurOperator{}, params.init);
  ImageGrid dual(w, h, 0.0), dual2(w, h, 0.0);  // dual2: consensus coupling only
  ImageGrid psi1 = theta, psi2 = theta;         // regular uses psi1 only
  ImageGrid psi_bar = theta;
  ProxDual warm1, warm2;
  ProxParams prox{rho, params.prox_max_iters, params.prox_tol};

  SolveReport local;
  local.converged = false;
  ImageGrid theta_new(w, h), v(w, h);
  auto prox_step = [&](double kappa, ProxDual& warm) {
    prox.weight_kappa = kappa;
    ProxResult r = tv_prox_solve(v, prox, &warm);
    if (!r.converged) ++local.prox_failures;
    return std::move(r.psi);
  };
  for (int j = 0; j < params.max_iters; ++j) {
    // Consensus: rho/2 (|theta - psi1 + dual|^2 + |theta - psi2 + dual2|^2)
    // is rho |theta - t|^2 up to a constant, i.e. the same Newton step with 2 rho.
    const double rho_theta = consensus ? 2.0 * rho : rho;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = consensus ? 0.5 * (psi1[i] - dual[i] + psi2[i] - dual2[i]) : psi_bar[i] - dual[i];
      theta_new[i] = detail::so_theta_newton(f_delta[i], y[i], t, theta[i], lam, rho_theta, params.newton_tol,
                                             params.newton_max, i);
    }
    ImageGrid psi_new, dual_new, dual2_new;
    double gap = 0.0;
    if (!tight) {
      for (std::size_t i = 0; i < n; ++i) v[i] = theta_new[i] + dual[i];
      psi1 = prox_step(rho, warm1);
      psi_new = psi1;
    } else if (!consensus) {
      // psi1 through g = psi1 + y: (4 la / rho) TV(g) + 1/2 |2 theta + 2 dual + y - psi2 - g|^2.
      for (std::size_t i = 0; i < n; ++i) v[i] = 2.0 * theta_new[i] + 2.0 * dual[i] + y[i] - psi2[i];
      psi1 = la > 0.0 ? prox_step(rho / (4.0 * la), warm1) - y : v - y;
      for (std::size_t i = 0; i < n; ++i) v[i] = 2.0 * theta_new[i] + 2.0 * dual[i] - psi1[i];
      psi2 = prox_step(rho / 4.0, warm2);
      psi_new = (psi1 + psi2) * 0.5;
    } else {
      for (std::size_t i = 0; i < n; ++i) v[i] = theta_new[i] + dual[i] + y[i];
      psi1 = la > 0.0 ? prox_step(rho / la, warm1) - y : v - y;
      for (std::size_t i = 0; i < n; ++i) v[i] = theta_new[i] + dual2[i];
      psi2 = prox_step(rho, warm2);
      psi_new = (psi1 + psi2) * 0.5;
      dual2_new = dual2 + theta_new - psi2;
      gap = std::max({detail::max_sq_diff(theta_new, psi1), detail::max_sq_diff(theta_new, psi2),
                      detail::max_sq_diff(dual2_new, dual2)});
    }
    dual_new = dual + theta_new - (consensus ? psi1 : psi_new);

    const double change = std::max({detail::max_sq_diff(theta_new, theta), detail::max_sq_diff(dual_new, dual),
                                    detail::max_sq_diff(psi_new, psi_bar), detail::max_sq_diff(theta_new, psi_new),
                                    gap});
    theta = theta_new;
    dual = std::move(dual_new);
    if (consensus) dual2 = std::move(dual2_new);
    psi_bar = std::move(psi_new);
    detail::check_iterate(theta, j, "so_solve_admm");
    if (params.observer) params.observer(j, theta);
    local.iterations = j + 1;
    local.final_change = change;
    if (change < params.admm_tol) {
      local.converged = true;
      break;
    }
  }
  if (report) *report = local;
  return theta;
}

}  // namespace mhdm
