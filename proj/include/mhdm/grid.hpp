#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhdm/error.hpp"

namespace mhdm {

/// Row-major raster of real intensities. Every image-shaped quantity in the
/// library (data, scales, cumulative reconstructions, test functions) is an
/// ImageGrid. Width runs along x (columns), height along y (rows).
class ImageGrid {
 public:
  ImageGrid() = default;

  ImageGrid(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), data_(width * height, fill) {
    check_shape();
  }

  ImageGrid(std::size_t width, std::size_t height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    check_shape();
    if (data_.size() != width_ * height_) {
      throw ValidationError("ImageGrid: data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(width_) + "x" +
                            std::to_string(height_));
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t row, std::size_t col) noexcept { return data_[row * width_ + col]; }
  double operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[row * width_ + col];
  }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double* row(std::size_t r) noexcept { return data_.data() + r * width_; }
  const double* row(std::size_t r) const noexcept { return data_.data() + r * width_; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& vector() const noexcept { return data_; }

  bool same_shape(const ImageGrid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  bool operator==(const ImageGrid& other) const = default;

  ImageGrid& operator+=(const ImageGrid& o) { return zip_assign(o, std::plus<>{}); }
  ImageGrid& operator-=(const ImageGrid& o) { return zip_assign(o, std::minus<>{}); }
  ImageGrid& operator*=(const ImageGrid& o) { return zip_assign(o, std::multiplies<>{}); }
  ImageGrid& operator/=(const ImageGrid& o) { return zip_assign(o, std::divides<>{}); }
  ImageGrid& operator+=(double s) {
    for (double& v : data_) v += s;
    return *this;
  }
  ImageGrid& operator-=(double s) { return *this += -s; }
  ImageGrid& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend ImageGrid operator+(ImageGrid a, const ImageGrid& b) { return a += b; }
  friend ImageGrid operator-(ImageGrid a, const ImageGrid& b) { return a -= b; }
  friend ImageGrid operator*(ImageGrid a, const ImageGrid& b) { return a *= b; }
  friend ImageGrid operator/(ImageGrid a, const ImageGrid& b) { return a /= b; }
  friend ImageGrid operator+(ImageGrid a, double s) { return a += s; }
  friend ImageGrid operator-(ImageGrid a, double s) { return a -= s; }
  friend ImageGrid operator*(ImageGrid a, double s) { return a *= s; }
  friend ImageGrid operator*(double s, ImageGrid a) { return a *= s; }

  template <class F>
  ImageGrid map(F&& f) const {
    ImageGrid out(width_, height_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = f(data_[i]);
    return out;
  }

  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }
  bool strictly_positive() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v > 0.0; });
  }

 private:
  void check_shape() const {
    if (width_ == 0 || height_ == 0) throw ValidationError("ImageGrid: width and height must be >= 1");
  }

  template <class Op>
  ImageGrid& zip_assign(const ImageGrid& o, Op op) {
    require_same_shape(o, "elementwise op");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] = op(data_[i], o.data_[i]);
    return *this;
  }

  void require_same_shape(const ImageGrid& o, const char* what) const {
    if (!same_shape(o)) {
      throw ValidationError(std::string(what) + ": dimension mismatch " + std::to_string(width_) +
                            "x" + std::to_string(height_) + " vs " + std::to_string(o.width_) +
                            "x" + std::to_string(o.height_));
    }
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const ImageGrid& a, const ImageGrid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ValidationError(std::string(what) + ": dimension mismatch " + std::to_string(a.width()) +
                          "x" + std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                          "x" + std::to_string(b.height()));
  }
}

inline void require_positive(const ImageGrid& g, const char* what) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0)) {
      throw ValidationError(std::string(what) + ": nonpositive value " + std::to_string(g[i]) +
                            " at pixel " + std::to_string(i));
    }
  }
}

// Reductions run sequentially in row-major order so results are bit-for-bit
// reproducible.

inline double sum(const ImageGrid& g) {
  double s = 0.0;
  for (double v : g.values()) s += v;
  return s;
}

inline double mean(const ImageGrid& g) { return sum(g) / static_cast<double>(g.size()); }

/// Unnormalized Euclidean inner product.
inline double inner(const ImageGrid& a, const ImageGrid& b) {
  require_same_shape(a, b, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const ImageGrid& g) { return std::sqrt(inner(g, g)); }

inline double rms(const ImageGrid& g) { return std::sqrt(inner(g, g) / static_cast<double>(g.size())); }

inline double max_abs(const ImageGrid& g) {
  double m = 0.0;
  for (double v : g.values()) m = std::max(m, std::abs(v));
  return m;
}

inline ImageGrid pointwise_log(const ImageGrid& g) {
  return g.map([](double v) { return std::log(v); });
}
inline ImageGrid pointwise_exp(const ImageGrid& g) {
  return g.map([](double v) { return std::exp(v); });
}

enum class Axis { X, Y };
enum class DiffScheme { Forward, Backward, Centered };

/// D+, D- or D0 along one axis with replicate (Neumann) boundaries: the
/// out-of-range neighbour equals the edge pixel, so differences across the
/// boundary are zero.
inline ImageGrid finite_difference(const ImageGrid& img, Axis axis, DiffScheme scheme) {
  const std::size_t w = img.width(), h = img.height();
  ImageGrid out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      std::size_t prev_r = r, next_r = r, prev_c = c, next_c = c;
      if (axis == Axis::X) {
        prev_c = c > 0 ? c - 1 : c;
        next_c = c + 1 < w ? c + 1 : c;
      } else {
        prev_r = r > 0 ? r - 1 : r;
        next_r = r + 1 < h ? r + 1 : r;
      }
      const double here = img(r, c);
      switch (scheme) {
        case DiffScheme::Forward: out(r, c) = img(next_r, next_c) - here; break;
        case DiffScheme::Backward: out(r, c) = here - img(prev_r, prev_c); break;
        case DiffScheme::Centered: out(r, c) = 0.5 * (img(next_r, next_c) - img(prev_r, prev_c)); break;
      }
    }
  }
  return out;
}

/// d(u) = 1 / (m * sqrt(eps^2 + (D+x u)^2 + (D+y u)^2)) with m = |u| when
/// `with_modulus` (TV(log u) stencils) and m = 1 otherwise (plain TV).
inline void stencil_weight_d(const ImageGrid& u, double eps, bool with_modulus, ImageGrid& out) {
  if (!(eps > 0.0)) throw ValidationError("stencil_weight_d: eps must be > 0");
  const std::size_t w = u.width(), h = u.height();
  if (!out.same_shape(u)) out = ImageGrid(w, h);
  const double eps2 = eps * eps;
  for (std::size_t r = 0; r < h; ++r) {
    const double* row = u.row(r);
    const double* below = r + 1 < h ? u.row(r + 1) : row;
    double* o = out.row(r);
    for (std::size_t c = 0; c < w; ++c) {
      const double dx = (c + 1 < w ? row[c + 1] : row[c]) - row[c];
      const double dy = below[c] - row[c];
      double m = 1.0;
      if (with_modulus) {
        m = std::abs(row[c]);
        if (m == 0.0) {
          throw NumericalError("stencil_weight_d: division hazard, u = 0 at row " + std::to_string(r) +
                               ", col " + std::to_string(c));
        }
      }
      o[c] = 1.0 / (m * std::sqrt(eps2 + dx * dx + dy * dy));
    }
  }
}

inline ImageGrid stencil_weight_d(const ImageGrid& u, double eps, bool with_modulus) {
  ImageGrid out;
  stencil_weight_d(u, eps, with_modulus, out);
  return out;
}

/// chi_ij = d_ij u_{i+1,j} + d_{i-1,j} u_{i-1,j} + d_ij u_{i,j+1} + d_{i,j-1} u_{i,j-1}
/// with replicate boundaries on both d and u. Together with stencil_diag,
/// chi - diag * u is the forward/backward discretization of div(d grad u).
inline void stencil_chi(const ImageGrid& d, const ImageGrid& u, ImageGrid& out) {
  require_same_shape(d, u, "stencil_chi");
  const std::size_t w = u.width(), h = u.height();
  if (!out.same_shape(u)) out = ImageGrid(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t rp = r + 1 < h ? r + 1 : r;
    const std::size_t rm = r > 0 ? r - 1 : r;
    const double* ur = u.row(r);
    const double* dr = d.row(r);
    const double* up = u.row(rp);
    const double* um = u.row(rm);
    const double* dm = d.row(rm);
    double* o = out.row(r);
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t cp = c + 1 < w ? c + 1 : c;
      const std::size_t cm = c > 0 ? c - 1 : c;
      o[c] = dr[c] * up[c] + dm[c] * um[c] + dr[c] * ur[cp] + dr[cm] * ur[cm];
    }
  }
}

inline ImageGrid stencil_chi(const ImageGrid& d, const ImageGrid& u) {
  ImageGrid out;
  stencil_chi(d, u, out);
  return out;
}

/// Diagonal weight 2 d_ij + d_{i-1,j} + d_{i,j-1}, replicate boundaries.
inline void stencil_diag(const ImageGrid& d, ImageGrid& out) {
  const std::size_t w = d.width(), h = d.height();
  if (!out.same_shape(d)) out = ImageGrid(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    const double* dr = d.row(r);
    const double* dm = d.row(r > 0 ? r - 1 : r);
    double* o = out.row(r);
    for (std::size_t c = 0; c < w; ++c) {
      o[c] = 2.0 * dr[c] + dm[c] + dr[c > 0 ? c - 1 : c];
    }
  }
}

inline ImageGrid stencil_diag(const ImageGrid& d) {
  ImageGrid out;
  stencil_diag(d, out);
  return out;
}

/// sqrt((D0x u)^2 + (D0y u)^2), the centered gradient magnitude.
inline void centered_gradient_magnitude(const ImageGrid& u, ImageGrid& out) {
  const std::size_t w = u.width(), h = u.height();
  if (!out.same_shape(u)) out = ImageGrid(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    const double* up = u.row(r + 1 < h ? r + 1 : r);
    const double* um = u.row(r > 0 ? r - 1 : r);
    const double* ur = u.row(r);
    double* o = out.row(r);
    for (std::size_t c = 0; c < w; ++c) {
      const double gx = 0.5 * (ur[c + 1 < w ? c + 1 : c] - ur[c > 0 ? c - 1 : c]);
      const double gy = 0.5 * (up[c] - um[c]);
      o[c] = std::sqrt(gx * gx + gy * gy);
    }
  }
}

}  // namespace mhdm
