#pragma once

#include <algorithm>
#include <cmath>
#include <memory>

#include "mhdm/error.hpp"
#include "mhdm/functionals.hpp"
#include "mhdm/grid.hpp"
#include "mhdm/operators.hpp"
#include "mhdm/solvers/initialize.hpp"
#include "mhdm/solvers/params.hpp"
#include "mhdm/solvers/so.hpp"

namespace mhdm {

namespace detail {

// h(s) per pixel with its first derivative and the positive part of the
// second; the scale fidelity is mean h(T(u x)).
struct ItakuraSaitoTerm {
  static double d1(double f, double s) { return 1.0 / s - f / (s * s); }
  static double d2(double f, double s) { return std::max(0.0, (2.0 * f / s - 1.0) / (s * s)); }
};

struct QuadraticROTerm {
  static double d1(double f, double s) {
    const double r = f / s;
    return 2.0 * r / s * (1.0 - r);
  }
  static double d2(double f, double s) {
    const double r = f / s;
    return std::max(0.0, (6.0 * r * r - 4.0 * r) / (s * s));
  }
};

/// First-order part of the TV(log u) flow; `d` is the modulus-weighted
/// stencil weight of u.
inline void log_source(const ImageGrid& u, const ImageGrid& d, LogSource mode, ImageGrid& out) {
  if (mode == LogSource::Centered) {
    centered_gradient_magnitude(u, out);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] /= u[i] * std::abs(u[i]);
  } else {
    if (!out.same_shape(u)) out = ImageGrid(u.width(), u.height());
    // d = 1 / (|u| sqrt(eps^2 + |D+ u|^2))
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = 1.0 / (d[i] * u[i] * u[i] * std::abs(u[i]));
  }
}

struct FlowConfig {
  bool log_penalty = true;  ///< TV(log u) stencils (modulus weights + source) vs plain TV(u)
  bool tight = false;
  bool refined = false;
};

/// Semi-implicit flow for u_k shared by AA, AA-log, TNV-log and TNV.
///
/// Literal update (stabilize_fidelity = false):
///   u+ = (u + dt (F + chi_u + src_u + la x (chi_Z + src_Z))) / (1 + dt (diag_u + la x^2 diag_Z))
/// with F = -lambda x T*[h'(T(u x))]. The stabilized update adds the
/// curvature c = lambda x^2 T^2*[h''_+] as c u / c to numerator / denominator
/// and moves the negative part of F into the denominator as |F|/u, so every
/// term is nonnegative and positivity of u is preserved.
template <class Term>
ImageGrid multiplicative_flow(const ImageGrid& f, const ImageGrid& x, const BlurOperator& T, ImageGrid u,
                              const FlowConfig& cfg, const SolverParams& params, const char* who) {
  const std::size_t n = u.size(), w = u.width(), h = u.height();
  const double dt = params.dt, lam = params.lambda_k;
  const double la = cfg.tight ? params.ak_lambda_k : 0.0;
  const bool identity = T.is_identity();
  detail::check_positive_iterate(u, -1, who);

  std::unique_ptr<StarNormAscent> ascent;
  if (cfg.refined) ascent = std::make_unique<StarNormAscent>(w, h, params.eps, dt, params.phi_seed);

  ImageGrid d, chi, diag, src, z, dz, chiz, diagz, srcz, next(w, h);
  ImageGrid hp(w, h), hpp(w, h), grad, curv;
  for (int it = 0; it < params.max_iters; ++it) {
    ImageGrid s = u * x;
    if (!identity) s = apply(T, s);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(s[i] > 0.0)) throw NumericalError(std::string(who) + ": nonpositive T(u x) at pixel " + std::to_string(i));
      hp[i] = Term::d1(f[i], s[i]);
      hpp[i] = Term::d2(f[i], s[i]);
    }
    grad = identity ? hp : apply_adjoint(T, hp);
    if (params.stabilize_fidelity) curv = identity ? hpp : apply_adjoint_squared(T, hpp);

    if (cfg.refined) {
      ascent->step(pointwise_log(u));
    } else {
      stencil_weight_d(u, params.eps, cfg.log_penalty, d);
      stencil_chi(d, u, chi);
      stencil_diag(d, diag);
      if (cfg.log_penalty) log_source(u, d, params.log_source, src);
    }
    if (la > 0.0) {
      z = u * x;
      stencil_weight_d(z, params.eps, true, dz);
      stencil_chi(dz, z, chiz);
      stencil_diag(dz, diagz);
      log_source(z, dz, params.log_source, srcz);
    }
    const double star_scale = cfg.refined ? ascent->mean_energy_scale() : 0.0;

    for (std::size_t i = 0; i < n; ++i) {
      double force = -lam * x[i] * grad[i];
      double gain = 0.0;  // nonnegative explicit terms
      double den = 1.0;
      if (cfg.refined) {
        force -= ascent->phi()[i] * star_scale / u[i];
      } else {
        gain += chi[i];
        den += dt * diag[i];
        if (cfg.log_penalty) gain += src[i];
      }
      if (la > 0.0) {
        gain += la * x[i] * (chiz[i] + srcz[i]);
        den += dt * la * x[i] * x[i] * diagz[i];
      }
      double num = u[i];
      if (params.stabilize_fidelity) {
        const double c = lam * x[i] * x[i] * curv[i];
        num += dt * (gain + c * u[i] + std::max(force, 0.0));
        den += dt * (c + std::max(-force, 0.0) / u[i]);
      } else {
        num += dt * (gain + force);
      }
      next[i] = num / den;
    }
    std::swap(u, next);
    detail::check_positive_iterate(u, it, who);
    if (params.observer) params.observer(it, u);
  }
  return u;
}

inline ImageGrid multiplicative_prev(const ImageGrid& f, const ScaleState& state) {
  return state.x_prev.empty() ? ImageGrid(f.width(), f.height(), 1.0) : state.x_prev;
}

inline void check_inputs(const ImageGrid& f, const ImageGrid& x, const char* who) {
  require_positive(f, who);
  require_same_shape(f, x, who);
  require_positive(x, who);
}

}  // namespace detail

/// AA scale step: Itakura-Saito fidelity with plain TV(u). The returned u_k
/// is adjusted so that x_k = u_k x_{k-1} lies in [min f, max f].
inline ImageGrid aa_solve(const ImageGrid& f_delta, const ScaleState& state, const BlurOperator& T,
                          const SolverParams& params) {
  params.validate();
  const ImageGrid x = detail::multiplicative_prev(f_delta, state);
  detail::check_inputs(f_delta, x, "aa_solve");
  ScaleState st = state;
  st.x_prev = x;
  ImageGrid u0 = initialize(Model::AA, Variant::Regular, f_delta, st, T, params.init);
  ImageGrid u = detail::multiplicative_flow<detail::ItakuraSaitoTerm>(f_delta, x, T, std::move(u0),
                                                                      {false, false, false}, params, "aa_solve");
  const double lo = f_delta.min(), hi = f_delta.max();
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i] * x[i], lo, hi) / x[i];
  return u;
}

/// AA-log scale step: Itakura-Saito fidelity with TV(log u); tight adds
/// lambda_k a_k TV(log(u x_{k-1})), refined replaces TV(log u) by the
/// star-norm of log u.
inline ImageGrid aalog_solve(const ImageGrid& f_delta, const ScaleState& state, const BlurOperator& T,
                             Variant variant, const SolverParams& params) {
  params.validate();
  const ImageGrid x = detail::multiplicative_prev(f_delta, state);
  detail::check_inputs(f_delta, x, "aalog_solve");
  ScaleState st = state;
  st.x_prev = x;
  ImageGrid u0 = initialize(Model::AAlog, variant, f_delta, st, T, params.init);
  const detail::FlowConfig cfg{true, variant != Variant::Regular, variant == Variant::Refined};
  return detail::multiplicative_flow<detail::ItakuraSaitoTerm>(f_delta, x, T, std::move(u0), cfg, params,
                                                               "aalog_solve");
}

/// TNV-log scale step: quadratic RO fidelity with TV(log u), regular or tight.
inline ImageGrid tnvlog_solve(const ImageGrid& f_delta, const ScaleState& state, const BlurOperator& T,
                              Variant variant, const SolverParams& params) {
  params.validate();
  if (variant == Variant::Refined) throw ValidationError("tnvlog_solve: no refined variant");
  const ImageGrid x = detail::multiplicative_prev(f_delta, state);
  detail::check_inputs(f_delta, x, "tnvlog_solve");
  ScaleState st = state;
  st.x_prev = x;
  ImageGrid u0 = initialize(Model::TNVlog, variant, f_delta, st, T, params.init);
  const detail::FlowConfig cfg{true, variant == Variant::Tight, false};
  return detail::multiplicative_flow<detail::QuadraticROTerm>(f_delta, x, T, std::move(u0), cfg, params,
                                                              "tnvlog_solve");
}

/// TNV baseline: quadratic RO fidelity with plain TV(u), denoising only.
inline ImageGrid tnv_solve(const ImageGrid& f_delta, const ScaleState& state, const SolverParams& params) {
  params.validate();
  const ImageGrid x = detail::multiplicative_prev(f_delta, state);
  detail::check_inputs(f_delta, x, "tnv_solve");
  ScaleState st = state;
  st.x_prev = x;
  const BlurOperator identity;
  ImageGrid u0 = initialize(Model::TNV, Variant::Regular, f_delta, st, identity, params.init);
  return detail::multiplicative_flow<detail::QuadraticROTerm>(f_delta, x, identity, std::move(u0),
                                                              {false, false, false}, params, "tnv_solve");
}

/// mean sqrt(eps^2 + |D+ u|^2) / |u|: the TV(log u) functional as weighted by
/// the modulus stencil.
inline double log_penalty(const ImageGrid& u, double eps) {
  const ImageGrid d = stencil_weight_d(u, eps, true);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double g = 1.0 / (d[i] * std::abs(u[i]));
    acc += g / std::abs(u[i]);
  }
  return acc / static_cast<double>(u.size());
}

/// Scale objective of the multiplicative models at u (refined excluded):
/// lambda_k H(f, T(u x)) + J(u) [+ lambda_k a_k J(u x)] with J = TV_eps for AA/TNV
/// and the modulus-weighted TV(log) for AA-log/TNV-log.
inline double multiplicative_energy(Model model, const ImageGrid& f_delta, const ImageGrid& x_prev,
                                    const BlurOperator& T, const ImageGrid& u, const SolverParams& params) {
  const ImageGrid s = apply(T, u * x_prev);
  const bool ro = model == Model::TNVlog || model == Model::TNV;
  const bool log_pen = model == Model::AAlog || model == Model::TNVlog;
  double e = params.lambda_k * fidelity(ro ? FidelityKind::QuadraticRO : FidelityKind::ItakuraSaito, f_delta, s);
  e += log_pen ? log_penalty(u, params.eps) : tv(u, params.eps);
  if (params.ak_lambda_k > 0.0 && log_pen) e += params.ak_lambda_k * log_penalty(u * x_prev, params.eps);
  return e;
}

}  // namespace mhdm
