#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"
#include "mhdm/operators.hpp"

namespace mhdm {

struct GammaNoiseSpec {
  double shape_a = 25.0;
  std::uint64_t seed = 0;
};

/// Gamma(shape a, scale 1/a) variates, so the mean is 1 and the standard
/// deviation 1/sqrt(a). Marsaglia-Tsang squeeze on mt19937_64; the uniform and
/// normal transforms are written out here instead of using <random>'s
/// distributions, whose algorithms differ between standard libraries.
class GammaSampler {
 public:
  GammaSampler(double shape_a, std::uint64_t seed) : a_(shape_a), rng_(seed) {
    if (!(shape_a > 0.0) || !std::isfinite(shape_a)) throw ValidationError("gamma shape must be finite and > 0");
    const double base = a_ < 1.0 ? a_ + 1.0 : a_;
    d_ = base - 1.0 / 3.0;
    c_ = 1.0 / std::sqrt(9.0 * d_);
  }

  double operator()() {
    double g = standard(d_, c_);
    // Shape < 1: G(a) = G(a+1) * U^{1/a}.
    if (a_ < 1.0) g *= std::pow(uniform_open(), 1.0 / a_);
    return g / a_;
  }

 private:
  double uniform_open() {
    for (;;) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    for (;;) {
      const double x = 2.0 * uniform_open() - 1.0;
      const double y = 2.0 * uniform_open() - 1.0;
      const double s = x * x + y * y;
      if (s > 0.0 && s < 1.0) {
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = y * m;
        has_spare_ = true;
        return x * m;
      }
    }
  }

  double standard(double d, double c) {
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      const double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double a_;
  double d_ = 0.0, c_ = 0.0;
  std::mt19937_64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. field filled in row-major order.
inline ImageGrid sample_gamma_field(const GammaNoiseSpec& spec, std::size_t width, std::size_t height) {
  GammaSampler draw(spec.shape_a, spec.seed);
  ImageGrid eta(width, height);
  for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = draw();
  return eta;
}

/// f = (T z) * eta.
inline ImageGrid degrade(const ImageGrid& z, const BlurOperator& T, const GammaNoiseSpec& spec) {
  if (!z.all_finite()) throw ValidationError("degrade: input has non-finite pixels");
  ImageGrid f = apply(T, z);
  f *= sample_gamma_field(spec, z.width(), z.height());
  return f;
}

/// Intensity offset applied before degradation/restoration (so log and ratio
/// terms never see 0) and removed from the outputs.
struct ShiftPolicy {
  double amount = 1.0;

  ImageGrid forward(const ImageGrid& img) const { return img + amount; }
  ImageGrid backward(const ImageGrid& img) const { return img - amount; }
};

}  // namespace mhdm
