#pragma once

#include <cmath>
#include <limits>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"

namespace mhdm {

struct QualityReport {
  double rmse = 0.0;
  double snr = 0.0;         ///< dB; +infinity when x == z
  double mean_shift = 0.0;  ///< mean(x) - mean(z)
};

/// ||x - z|| / sqrt(N).
inline double rmse(const ImageGrid& x, const ImageGrid& z) {
  require_same_shape(x, z, "rmse");
  return rms(x - z);
}

/// 10 log10(||z||^2 / ||x - z||^2); +infinity for an exact match.
inline double snr(const ImageGrid& x, const ImageGrid& z) {
  require_same_shape(x, z, "snr");
  const double signal = inner(z, z);
  if (signal == 0.0) throw ValidationError("snr: reference image is all zero");
  const ImageGrid e = x - z;
  const double err = inner(e, e);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(signal / err);
}

inline double mean_shift(const ImageGrid& x, const ImageGrid& z) {
  require_same_shape(x, z, "mean_shift");
  return mean(x) - mean(z);
}

inline QualityReport quality(const ImageGrid& x, const ImageGrid& z) {
  return QualityReport{rmse(x, z), snr(x, z), mean_shift(x, z)};
}

}  // namespace mhdm
