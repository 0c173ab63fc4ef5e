#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mhdm/error.hpp"
#include "mhdm/grid.hpp"

namespace mhdm {

/// Linear blur T: correlation with a square kernel under half-sample
/// symmetric ("reflect") padding, or the identity.
class BlurOperator {
 public:
  /// Identity operator.
  BlurOperator() = default;

  /// Kernel given row-major with odd side length `size`.
  BlurOperator(std::size_t size, std::vector<double> kernel) : size_(size), kernel_(std::move(kernel)) {
    if (size_ % 2 == 0) throw ValidationError("BlurOperator: kernel size must be odd");
    if (kernel_.size() != size_ * size_) throw ValidationError("BlurOperator: kernel length mismatch");
    double total = 0.0;
    for (double k : kernel_) {
      if (!(k >= 0.0) || !std::isfinite(k)) throw ValidationError("BlurOperator: kernel weights must be finite and >= 0");
      total += k;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("BlurOperator: kernel must sum to 1");
    identity_ = false;
  }

  bool is_identity() const noexcept { return identity_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t half_width() const noexcept { return size_ / 2; }
  const std::vector<double>& kernel() const noexcept { return kernel_; }
  double weight(std::size_t row, std::size_t col) const noexcept { return kernel_[row * size_ + col]; }

  /// Short description, e.g. "identity" or "kernel:5x5".
  std::string describe() const {
    return identity_ ? "identity" : "kernel:" + std::to_string(size_) + "x" + std::to_string(size_);
  }

 private:
  bool identity_ = true;
  std::size_t size_ = 1;
  std::vector<double> kernel_{1.0};
};

/// Sampled exp(-(i^2+j^2)/(2 variance)) on {-h..h}^2, normalized to sum 1.
inline BlurOperator gaussian_kernel(std::size_t size, double variance) {
  if (size == 0 || size % 2 == 0) throw ValidationError("gaussian_kernel: size must be odd and >= 1");
  if (!(variance > 0.0)) throw ValidationError("gaussian_kernel: variance must be > 0");
  const long h = static_cast<long>(size / 2);
  std::vector<double> k;
  k.reserve(size * size);
  double total = 0.0;
  for (long i = -h; i <= h; ++i) {
    for (long j = -h; j <= h; ++j) {
      const double v = std::exp(-static_cast<double>(i * i + j * j) / (2.0 * variance));
      k.push_back(v);
      total += v;
    }
  }
  for (double& v : k) v /= total;
  return BlurOperator(size, std::move(k));
}

namespace detail {

/// Half-sample symmetric index: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline std::size_t reflect_index(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

/// Image extended by `pad` pixels on every side using reflect_index.
inline std::vector<double> pad_reflect(const ImageGrid& img, std::size_t pad) {
  const std::size_t w = img.width(), h = img.height();
  const std::size_t pw = w + 2 * pad, ph = h + 2 * pad;
  std::vector<double> out(pw * ph);
  for (std::size_t r = 0; r < ph; ++r) {
    const std::size_t sr = reflect_index(static_cast<long>(r) - static_cast<long>(pad), h);
    for (std::size_t c = 0; c < pw; ++c) {
      out[r * pw + c] = img(sr, reflect_index(static_cast<long>(c) - static_cast<long>(pad), w));
    }
  }
  return out;
}

template <class WeightFn>
ImageGrid correlate(const BlurOperator& op, const ImageGrid& img, WeightFn weight) {
  const std::size_t w = img.width(), h = img.height(), n = op.size(), hw = op.half_width();
  const std::size_t pw = w + 2 * hw;
  const std::vector<double> padded = pad_reflect(img, hw);
  ImageGrid out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        const double* row = &padded[(r + a) * pw + c];
        for (std::size_t b = 0; b < n; ++b) acc += weight(a, b) * row[b];
      }
      out(r, c) = acc;
    }
  }
  return out;
}

/// Transpose of correlate(): scatter into the padded frame, then fold every
/// padded pixel back onto the source pixel it was copied from.
template <class WeightFn>
ImageGrid correlate_adjoint(const BlurOperator& op, const ImageGrid& img, WeightFn weight) {
  const std::size_t w = img.width(), h = img.height(), n = op.size(), hw = op.half_width();
  const std::size_t pw = w + 2 * hw, ph = h + 2 * hw;
  std::vector<double> padded(pw * ph, 0.0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = img(r, c);
      for (std::size_t a = 0; a < n; ++a) {
        double* row = &padded[(r + a) * pw + c];
        for (std::size_t b = 0; b < n; ++b) row[b] += weight(a, b) * v;
      }
    }
  }
  ImageGrid out(w, h, 0.0);
  for (std::size_t r = 0; r < ph; ++r) {
    const std::size_t sr = reflect_index(static_cast<long>(r) - static_cast<long>(hw), h);
    for (std::size_t c = 0; c < pw; ++c) {
      out(sr, reflect_index(static_cast<long>(c) - static_cast<long>(hw), w)) += padded[r * pw + c];
    }
  }
  return out;
}

}  // namespace detail

inline ImageGrid apply(const BlurOperator& op, const ImageGrid& img) {
  if (op.is_identity()) return img;
  return detail::correlate(op, img, [&](std::size_t a, std::size_t b) { return op.weight(a, b); });
}

/// Exact transpose of apply(), padding included: every contribution made by
/// the forward pass is scattered back to the pixel it was read from.
inline ImageGrid apply_adjoint(const BlurOperator& op, const ImageGrid& img) {
  if (op.is_identity()) return img;
  return detail::correlate_adjoint(op, img, [&](std::size_t a, std::size_t b) { return op.weight(a, b); });
}

/// sum_m K(m, p)^2 c_m: the diagonal of T^* diag(c) T away from the border
/// (where reflected taps can land on the same pixel it is an underestimate).
inline ImageGrid apply_adjoint_squared(const BlurOperator& op, const ImageGrid& img) {
  if (op.is_identity()) return img;
  return detail::correlate_adjoint(op, img, [&](std::size_t a, std::size_t b) {
    const double k = op.weight(a, b);
    return k * k;
  });
}

}  // namespace mhdm
