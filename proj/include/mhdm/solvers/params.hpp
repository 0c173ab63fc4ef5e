#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"

namespace mhdm {

enum class Model { SO, AA, AAlog, TNVlog, TNV };
enum class Variant { Regular, Tight, Refined };
enum class SolverKind { EL, ADMM };

/// Which of the two initialization families to use; Auto picks the
/// per-model default (fidelity minimizing for the refined variants).
enum class InitMode { Auto, Penalty, Fidelity };

/// First-order term of the TV(log u) flow. Centered: |grad u| by centered
/// differences over u|u|, as the scheme is usually written. Consistent:
/// sqrt(eps^2 + |D+ u|^2) / u^2, the exact partial derivative of the discrete
/// objective, which makes the flow a semi-implicit gradient descent.
enum class LogSource { Centered, Consistent };

/// Tight SO ADMM coupling. Averaged: one constraint theta = (psi1 + psi2)/2,
/// as the tight splitting is usually stated; its fixed points minimize the
/// infimal convolution of the two TV terms rather than their sum. Consensus:
/// theta = psi1 and theta = psi2 with one dual each, which solves the tight
/// objective itself.
enum class AdmmCoupling { Averaged, Consensus };

inline const char* to_string(Model m) {
  switch (m) {
    case Model::SO: return "so";
    case Model::AA: return "aa";
    case Model::AAlog: return "aalog";
    case Model::TNVlog: return "tnvlog";
    case Model::TNV: return "tnv";
  }
  return "?";
}

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Regular: return "regular";
    case Variant::Tight: return "tight";
    case Variant::Refined: return "refined";
  }
  return "?";
}

inline const char* to_string(SolverKind s) { return s == SolverKind::EL ? "el" : "admm"; }

inline Model parse_model(const std::string& s) {
  if (s == "so") return Model::SO;
  if (s == "aa") return Model::AA;
  if (s == "aalog") return Model::AAlog;
  if (s == "tnvlog") return Model::TNVlog;
  if (s == "tnv") return Model::TNV;
  throw ValidationError("unknown model '" + s + "'");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "regular") return Variant::Regular;
  if (s == "tight") return Variant::Tight;
  if (s == "refined") return Variant::Refined;
  throw ValidationError("unknown variant '" + s + "'");
}

inline SolverKind parse_solver(const std::string& s) {
  if (s == "el") return SolverKind::EL;
  if (s == "admm") return SolverKind::ADMM;
  throw ValidationError("unknown solver '" + s + "'");
}

/// Called with (iteration index, current iterate) after every inner step.
using IterationObserver = std::function<void(int, const ImageGrid&)>;

struct SolverParams {
  double dt = 0.01;
  double eps = 0.01;
  int max_iters = 1000;
  double lambda_k = 0.01;
  double ak_lambda_k = 0.0;  ///< lambda_k * a_k for tight/refined, 0 otherwise

  double rho = 1.0;
  double admm_tol = 1e-6;
  double newton_tol = 1e-10;
  int newton_max = 50;
  int prox_max_iters = 200;
  double prox_tol = 1e-4;  ///< certified RMS bound on each TV-prox output

  /// Move the fidelity's own curvature (and, in the multiplicative domain, the
  /// part of the fidelity force pushing towards 0) to the implicit side of
  /// the update. Leaves every fixed point unchanged; false gives the literal
  /// explicit-fidelity update, which diverges once dt * lambda_k * curvature > 2.
  bool stabilize_fidelity = true;

  InitMode init = InitMode::Auto;
  LogSource log_source = LogSource::Centered;
  AdmmCoupling admm_coupling = AdmmCoupling::Averaged;
  std::uint64_t phi_seed = 0x5eedULL;

  IterationObserver observer;

  void validate() const {
    if (!(dt > 0.0) || !(eps > 0.0) || !(rho > 0.0)) throw ValidationError("solver params: dt, eps, rho must be > 0");
    if (!(lambda_k > 0.0) || !std::isfinite(lambda_k)) throw ValidationError("solver params: lambda_k must be finite and > 0");
    if (!(ak_lambda_k >= 0.0)) throw ValidationError("solver params: ak_lambda_k must be >= 0");
    if (max_iters < 0 || newton_max < 1 || prox_max_iters < 1) throw ValidationError("solver params: bad iteration caps");
    if (!(admm_tol > 0.0) || !(newton_tol > 0.0) || !(prox_tol > 0.0)) throw ValidationError("solver params: tolerances must be > 0");
  }
};

/// Partial reconstruction before scale k: x_prev = prod u_j (multiplicative
/// models) or y_prev = sum w_j (log-domain SO).
struct ScaleState {
  ImageGrid x_prev;
  ImageGrid y_prev;
  int k = 0;

  static ScaleState multiplicative(ImageGrid x, int k = 0) {
    ScaleState s;
    s.x_prev = std::move(x);
    s.k = k;
    return s;
  }
  static ScaleState log_domain(ImageGrid y, int k = 0) {
    ScaleState s;
    s.y_prev = std::move(y);
    s.k = k;
    return s;
  }
};

namespace detail {

inline void check_iterate(const ImageGrid& v, int iteration, const char* who) {
  if (!v.all_finite()) {
    double worst = 0.0;
    for (double x : v.values()) {
      if (std::isfinite(x)) worst = std::max(worst, std::abs(x));
    }
    throw NumericalError(std::string(who) + ": non-finite iterate at iteration " + std::to_string(iteration) +
                         " (max finite |value| " + std::to_string(worst) + ")");
  }
}

inline void check_positive_iterate(const ImageGrid& v, int iteration, const char* who) {
  check_iterate(v, iteration, who);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) {
      throw NumericalError(std::string(who) + ": nonpositive iterate at iteration " + std::to_string(iteration) +
                           ", pixel " + std::to_string(i));
    }
  }
}

}  // namespace detail

}  // namespace mhdm
