#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mhdm/error.hpp"
#include "mhdm/functionals.hpp"
#include "mhdm/grid.hpp"
#include "mhdm/metrics.hpp"
#include "mhdm/operators.hpp"
#include "mhdm/solvers.hpp"

namespace mhdm {

struct ModelConfig {
  Model model = Model::SO;
  Variant variant = Variant::Regular;
  SolverKind solver = SolverKind::EL;
  double lambda0 = 0.01;
  std::optional<double> q;  ///< unset: 2 for regular, 3 for tight/refined
  double a0 = 1.0;
  double schedule_exp = 1.5;
  int num_scales = 15;
  double tau = 1.0 + 1e-9;
  SolverParams solver_params;

  double growth() const { return q ? *q : (variant == Variant::Regular ? 2.0 : 3.0); }

  void validate() const {
    if (!(lambda0 > 0.0)) throw ValidationError("config: lambda0 must be > 0");
    if (!(growth() >= 1.0)) throw ValidationError("config: q must be >= 1");
    if (!(a0 >= 0.0) || !(schedule_exp >= 0.0)) throw ValidationError("config: a0 and schedule exponent must be >= 0");
    if (num_scales < 0) throw ValidationError("config: num_scales must be >= 0");
    if (!(tau >= 1.0)) throw ValidationError("config: tau must be >= 1");
    if (solver == SolverKind::ADMM && model != Model::SO) throw ValidationError("config: ADMM exists only for the SO model");
    if (solver == SolverKind::ADMM && variant == Variant::Refined) throw ValidationError("config: refined SO has no ADMM form");
    if ((model == Model::AA || model == Model::TNV) && variant != Variant::Regular) {
      throw ValidationError(std::string("config: model ") + to_string(model) + " has only the regular variant");
    }
    if (model == Model::TNVlog && variant == Variant::Refined) throw ValidationError("config: tnvlog has no refined variant");
  }
};

/// lambda_k = lambda0 q^k.
inline double lambda_schedule(const ModelConfig& c, int k) { return c.lambda0 * std::pow(c.growth(), k); }

/// a_k = a0 / (1 + k)^p, p = 3/2 by default.
inline double ak_schedule(const ModelConfig& c, int k) { return c.a0 / std::pow(1.0 + k, c.schedule_exp); }

inline FidelityKind residual_kind(Model m) {
  return (m == Model::TNVlog || m == Model::TNV) ? FidelityKind::QuadraticRO : FidelityKind::ItakuraSaito;
}

/// J used in the tight residual: TV(log .) for the log-penalty models, TV otherwise.
inline double tight_penalty(Model m, const ImageGrid& x) {
  return (m == Model::AA || m == Model::TNV) ? tv(x, 0.0) : tv_log(x, 0.0);
}

struct MultiscaleResult {
  std::vector<ImageGrid> scales;      ///< u_j, or w_j for SO
  std::vector<ImageGrid> cumulative;  ///< x_k (SO: e^{y_k})
  std::vector<ImageGrid> log_cumulative;  ///< y_k, SO only
  std::vector<double> lambdas, aks;
  std::vector<double> residuals;        ///< H(f, T x_k)
  std::vector<double> tight_residuals;  ///< H + a_k J(x_k)
  std::vector<SolveReport> reports;
  std::vector<double> rmse, snr;        ///< filled when ground truth is given
  std::optional<int> k_min;
};

enum class StoppingMode { Regular, Tight };

inline StoppingMode stopping_mode(Variant v) { return v == Variant::Regular ? StoppingMode::Regular : StoppingMode::Tight; }

struct StoppingIndex {
  int k = 0;
  bool not_yet_discrepant = false;  ///< the last computed scale is still above tau delta^2
  bool none_above = false;          ///< already x_0 is below tau delta^2
};

/// k* = max{k : r_k >= tau delta^2} with r the plain or tight residual trace.
inline StoppingIndex stopping_index(const MultiscaleResult& result, const NoiseLevel& noise, StoppingMode mode) {
  const std::vector<double>& r = mode == StoppingMode::Regular ? result.residuals : result.tight_residuals;
  if (r.empty()) throw ValidationError("stopping_index: empty residual trace");
  if (!(noise.delta_sq > 0.0)) throw ValidationError("stopping_index: delta^2 must be > 0");
  const double threshold = noise.tau * noise.delta_sq;
  StoppingIndex out;
  int found = -1;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] >= threshold) found = static_cast<int>(k);
  }
  if (found < 0) {
    out.none_above = true;
    return out;
  }
  out.k = found;
  out.not_yet_discrepant = found == static_cast<int>(r.size()) - 1;
  return out;
}

/// Runs scales k = 0..num_scales. `ground_truth`, when given, lives in the same
/// intensity frame as f_delta; metrics are computed after subtracting `shift`
/// from both.
inline MultiscaleResult run(const ImageGrid& f_delta, const BlurOperator& T, const ModelConfig& config,
                            const std::optional<ImageGrid>& ground_truth = std::nullopt, double shift = 0.0) {
  config.validate();
  require_positive(f_delta, "run");
  if ((config.model == Model::SO || config.model == Model::TNV) && !T.is_identity()) {
    throw ValidationError(std::string("run: model ") + to_string(config.model) + " supports denoising only");
  }
  std::optional<ImageGrid> z;
  if (ground_truth) {
    require_same_shape(f_delta, *ground_truth, "run (ground truth)");
    z = *ground_truth - shift;
  }

  MultiscaleResult res;
  const std::size_t w = f_delta.width(), h = f_delta.height();
  const bool so = config.model == Model::SO;
  ImageGrid x(w, h, 1.0), y(w, h, 0.0);
  const double fmin = f_delta.min(), fmax = f_delta.max();

  for (int k = 0; k <= config.num_scales; ++k) {
    SolverParams p = config.solver_params;
    p.lambda_k = lambda_schedule(config, k);
    const double ak = ak_schedule(config, k);
    p.ak_lambda_k = config.variant == Variant::Regular ? 0.0 : p.lambda_k * ak;
    SolveReport report;
    ImageGrid part;
    try {
      switch (config.model) {
        case Model::SO: {
          const ScaleState st = ScaleState::log_domain(y, k);
          part = config.solver == SolverKind::ADMM ? so_solve_admm(f_delta, st, config.variant, p, &report)
                                                   : so_solve_el(f_delta, st, config.variant, p, &report);
          break;
        }
        case Model::AA: part = aa_solve(f_delta, ScaleState::multiplicative(x, k), T, p); break;
        case Model::AAlog: part = aalog_solve(f_delta, ScaleState::multiplicative(x, k), T, config.variant, p); break;
        case Model::TNVlog: part = tnvlog_solve(f_delta, ScaleState::multiplicative(x, k), T, config.variant, p); break;
        case Model::TNV: part = tnv_solve(f_delta, ScaleState::multiplicative(x, k), p); break;
      }
    } catch (const NumericalError& e) {
      throw NumericalError("scale " + std::to_string(k) + ": " + e.what());
    }

    if (so) {
      y += part;
      x = pointwise_exp(y);
      res.log_cumulative.push_back(y);
    } else {
      x *= part;
      if (config.model == Model::AA) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], fmin, fmax);
      }
    }
    res.scales.push_back(std::move(part));
    res.cumulative.push_back(x);
    res.lambdas.push_back(p.lambda_k);
    res.aks.push_back(ak);
    res.reports.push_back(report);

    const ImageGrid tx = apply(T, x);
    const double r = so ? fidelity(FidelityKind::SOExponential, f_delta, y) : fidelity(residual_kind(config.model), f_delta, tx);
    res.residuals.push_back(r);
    res.tight_residuals.push_back(r + ak * tight_penalty(config.model, x));
    if (z) {
      const ImageGrid xs = x - shift;
      res.rmse.push_back(rmse(xs, *z));
      res.snr.push_back(snr(xs, *z));
    }
  }
  if (z) {
    int best = 0;
    for (std::size_t k = 1; k < res.rmse.size(); ++k) {
      if (res.rmse[k] < res.rmse[best]) best = static_cast<int>(k);
    }
    res.k_min = best;
  }
  return res;
}

namespace detail {

inline void csv_number(std::ostream& os, double v) {
  if (std::isnan(v)) return;
  if (std::isinf(v)) {
    os << (v > 0 ? "inf" : "-inf");
    return;
  }
  os << v;
}

}  // namespace detail

/// CSV trace: k,lambda_k,a_k,residual,tight_residual,rmse,snr,ratio_to_delta_sq.
/// rmse/snr are blank without ground truth, the ratio blank without delta^2;
/// the ratio uses the residual the stopping rule compares (tight for tight/refined).
inline void write_trace_csv(std::ostream& os, const MultiscaleResult& r, std::optional<double> delta_sq,
                            StoppingMode mode) {
  const auto old_precision = os.precision(12);
  os << "k,lambda_k,a_k,residual,tight_residual,rmse,snr,ratio_to_delta_sq\n";
  for (std::size_t k = 0; k < r.residuals.size(); ++k) {
    os << k << ',';
    detail::csv_number(os, r.lambdas[k]);
    os << ',';
    detail::csv_number(os, r.aks[k]);
    os << ',';
    detail::csv_number(os, r.residuals[k]);
    os << ',';
    detail::csv_number(os, r.tight_residuals[k]);
    os << ',';
    if (k < r.rmse.size()) detail::csv_number(os, r.rmse[k]);
    os << ',';
    if (k < r.snr.size()) detail::csv_number(os, r.snr[k]);
    os << ',';
    if (delta_sq && *delta_sq > 0.0) {
      const double v = mode == StoppingMode::Regular ? r.residuals[k] : r.tight_residuals[k];
      detail::csv_number(os, v / *delta_sq);
    }
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace mhdm
