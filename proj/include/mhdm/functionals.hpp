#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"

namespace mhdm {

// All integrals use the normalized pixel measure (weight 1/N per pixel), so
// fidelities, TV values and noise levels do not depend on the resolution.

enum class FidelityKind {
  QuadraticRO,    ///< mean (f/g - 1)^2
  ItakuraSaito,   ///< mean (f/g + log g - log f - 1)
  SOExponential,  ///< g given in the log domain: mean (f e^{-g} + g - log f - 1)
};

inline const char* to_string(FidelityKind k) {
  switch (k) {
    case FidelityKind::QuadraticRO: return "quadratic-ro";
    case FidelityKind::ItakuraSaito: return "itakura-saito";
    case FidelityKind::SOExponential: return "so-exponential";
  }
  return "?";
}

inline double fidelity(FidelityKind kind, const ImageGrid& f_delta, const ImageGrid& g) {
  require_same_shape(f_delta, g, "fidelity");
  require_positive(f_delta, "fidelity (data)");
  if (kind != FidelityKind::SOExponential) require_positive(g, "fidelity (model)");
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double f = f_delta[i];
    switch (kind) {
      case FidelityKind::QuadraticRO: {
        const double r = f / g[i] - 1.0;
        acc += r * r;
        break;
      }
      case FidelityKind::ItakuraSaito: {
        // r - log r - 1 with r = f/g, written to avoid cancellation.
        const double r = f / g[i];
        acc += (r - 1.0) - std::log(r);
        break;
      }
      case FidelityKind::SOExponential: {
        const double r = f * std::exp(-g[i]);
        acc += (r - 1.0) - std::log(r);
        break;
      }
    }
  }
  return acc / static_cast<double>(g.size());
}

/// mean sqrt(eps^2 + (D+x u)^2 + (D+y u)^2); eps = 0 is the isotropic TV.
inline double tv(const ImageGrid& img, double eps) {
  if (!(eps >= 0.0)) throw ValidationError("tv: eps must be >= 0");
  const std::size_t w = img.width(), h = img.height();
  const double eps2 = eps * eps;
  double acc = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double here = img(r, c);
      const double dx = (c + 1 < w ? img(r, c + 1) : here) - here;
      const double dy = (r + 1 < h ? img(r + 1, c) : here) - here;
      acc += std::sqrt(eps2 + dx * dx + dy * dy);
    }
  }
  return acc / static_cast<double>(img.size());
}

inline double tv_log(const ImageGrid& img, double eps) {
  require_positive(img, "tv_log");
  return tv(pointwise_log(img), eps);
}

/// div(grad(u) / sqrt(eps^2 + |grad u|^2)) via forward gradient / backward
/// divergence with Neumann boundaries.
inline ImageGrid tv_divergence(const ImageGrid& u, double eps) {
  const ImageGrid d = stencil_weight_d(u, eps, false);
  ImageGrid out = stencil_chi(d, u);
  const ImageGrid diag = stencil_diag(d);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= diag[i] * u[i];
  return out;
}

/// Gradient ascent on R(phi) = <w, phi> / TV_eps(phi) over zero-mean test
/// functions phi. The ascent direction is discretized with the same
/// semi-implicit chi/diag stencil as the solvers; steps that would lower R
/// are rejected and the step length halved, so R is non-decreasing for a
/// fixed w. Step lengths are measured relative to rms(w - mean w), which
/// makes the phi iterates invariant under w -> alpha w (alpha > 0).
class StarNormAscent {
 public:
  StarNormAscent(std::size_t width, std::size_t height, double eps, double dt,
                 std::uint64_t seed = 0x5eedULL, double perturbation = 1e-3)
      : eps_(eps), dt_(dt), phi_(width, height) {
    if (!(eps > 0.0) || !(dt > 0.0)) throw ValidationError("StarNormAscent: eps and dt must be > 0");
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < phi_.size(); ++i) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      phi_[i] = perturbation * (2.0 * u - 1.0);
    }
    phi_ -= mean(phi_);
    tv_phi_ = tv(phi_, eps_);
  }

  const ImageGrid& phi() const noexcept { return phi_; }
  double tv_phi() const noexcept { return tv_phi_; }

  /// <w, phi> / TV_eps(phi) for the current phi.
  double ratio(const ImageGrid& w) const { return ratio_for(w, phi_, tv_phi_); }

  /// phi / TV_eps(phi): the subgradient of the star-norm at w once phi is the
  /// maximizer.
  ImageGrid subgradient() const { return phi_ * (1.0 / tv_phi_); }

  /// Coefficient of phi in the star-norm force inside a pixel-mean energy.
  /// The star-norm is a ratio of pixel sums, so after dividing the whole
  /// pixel-sum energy by N it keeps only the weight 1/N.
  double mean_energy_scale() const { return 1.0 / (static_cast<double>(phi_.size()) * tv_phi_); }

  /// One ascent step for the given w; returns R at the (possibly unchanged) phi.
  double step(const ImageGrid& w) {
    require_same_shape(w, phi_, "StarNormAscent::step");
    ImageGrid wc = w - mean(w);
    const double scale = rms(wc);
    const double current = ratio_for(wc, phi_, tv_phi_);
    if (scale == 0.0) return current;

    stencil_weight_d(phi_, eps_, false, d_);
    stencil_chi(d_, phi_, chi_);
    stencil_diag(d_, diag_);
    const double kappa = current / tv_phi_;
    for (int attempt = 0; attempt < 40; ++attempt) {
      const double tau = step_ * dt_ / scale;
      ImageGrid candidate(phi_.width(), phi_.height());
      for (std::size_t i = 0; i < phi_.size(); ++i) {
        const double drive = wc[i] / tv_phi_;
        if (kappa >= 0.0) {
          candidate[i] = (phi_[i] + tau * (drive + kappa * chi_[i])) / (1.0 + tau * kappa * diag_[i]);
        } else {
          candidate[i] = phi_[i] + tau * (drive + kappa * (chi_[i] - diag_[i] * phi_[i]));
        }
      }
      candidate -= mean(candidate);
      const double cand_tv = tv(candidate, eps_);
      const double cand_ratio = ratio_for(wc, candidate, cand_tv);
      if (cand_ratio >= current) {
        phi_ = std::move(candidate);
        tv_phi_ = cand_tv;
        step_ = std::min(step_ * 1.25, 1e6);
        return cand_ratio;
      }
      step_ *= 0.5;
    }
    return current;
  }

 private:
  static double ratio_for(const ImageGrid& w, const ImageGrid& phi, double tv_phi) {
    return inner(w, phi) / static_cast<double>(w.size()) / tv_phi;
  }

  double eps_;
  double dt_;
  double step_ = 1.0;
  ImageGrid phi_;
  double tv_phi_ = 0.0;
  ImageGrid d_, chi_, diag_;
};

struct StarNormEstimate {
  double value = 0.0;
  ImageGrid phi;
  bool divergent = false;       ///< mean(w) is not ~0, so the supremum is +inf
  std::vector<double> history;  ///< ratio after each ascent step
};

/// Ascent estimate of ||w||_* = sup <w, phi> / TV_eps(phi). The supremum is
/// finite only for zero-mean w; |mean w| > mean_tol is reported as divergent.
inline StarNormEstimate star_norm_estimate(const ImageGrid& w, double eps, int steps, double dt,
                                           double mean_tol = 1e-8) {
  StarNormEstimate out;
  if (std::abs(mean(w)) > mean_tol) {
    out.divergent = true;
    out.value = std::numeric_limits<double>::infinity();
    out.phi = ImageGrid(w.width(), w.height());
    return out;
  }
  StarNormAscent ascent(w.width(), w.height(), eps, dt);
  out.history.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  double value = ascent.ratio(w - mean(w));
  for (int s = 0; s < steps; ++s) {
    value = ascent.step(w);
    out.history.push_back(value);
  }
  out.value = std::max(value, 0.0);
  out.phi = ascent.phi();
  return out;
}

struct NoiseLevel {
  double delta_sq = 0.0;     ///< fidelity units
  double tau = 1.0 + 1e-9;   ///< discrepancy factor
};

/// delta^2 = H(f_delta, T z).
inline NoiseLevel noise_level(FidelityKind kind, const ImageGrid& f_delta, const ImageGrid& tz,
                              double tau = 1.0 + 1e-9) {
  const ImageGrid& model = tz;
  if (kind == FidelityKind::SOExponential) {
    return NoiseLevel{fidelity(kind, f_delta, pointwise_log(model)), tau};
  }
  return NoiseLevel{fidelity(kind, f_delta, model), tau};
}

/// Expected per-pixel fidelity between f = (Tz) eta and Tz for
/// eta ~ Gamma(shape a, scale 1/a): log a - digamma(a) for the Itakura-Saito
/// forms and Var(eta) = 1/a for the quadratic one. Used when no clean image
/// is available to measure delta^2 directly.
inline double expected_noise_level(FidelityKind kind, double shape_a) {
  if (!(shape_a > 0.0)) throw ValidationError("expected_noise_level: shape must be > 0");
  if (kind == FidelityKind::QuadraticRO) return 1.0 / shape_a;
  return std::log(shape_a) - boost::math::digamma(shape_a);
}

}  // namespace mhdm
