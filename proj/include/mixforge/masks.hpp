#pragma once

// Mask generators for the hand-crafted and Fourier-guided cutting policies,
// and the per-pixel blend that applies a mask to an image pair.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/error.hpp"
#include "mixforge/fft.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/tensor.hpp"

namespace mixforge {

/// Nominal rectangle: center pixel and side lengths. The realized region is
/// [cx - cut_w/2, cx - cut_w/2 + cut_w) clipped to the image.
struct RectSpec {
  std::int64_t cx = 0;
  std::int64_t cy = 0;
  std::int64_t cut_w = 0;
  std::int64_t cut_h = 0;
  friend bool operator==(const RectSpec&, const RectSpec&) = default;
};

/// Half-open clipped pixel bounds of a RectSpec.
struct RectBounds {
  std::size_t row0 = 0, row1 = 0, col0 = 0, col1 = 0;
  std::size_t rows() const noexcept { return row1 - row0; }
  std::size_t cols() const noexcept { return col1 - col0; }
  std::size_t area() const noexcept { return rows() * cols(); }
};

inline RectBounds clip_rect(const RectSpec& r, std::size_t h, std::size_t w) noexcept {
  const auto clamp = [](std::int64_t v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp<std::int64_t>(v, 0, static_cast<std::int64_t>(hi)));
  };
  const std::int64_t x0 = r.cx - r.cut_w / 2;
  const std::int64_t y0 = r.cy - r.cut_h / 2;
  return RectBounds{clamp(y0, h), clamp(y0 + r.cut_h, h), clamp(x0, w), clamp(x0 + r.cut_w, w)};
}

/// True when the nominal rectangle lies inside the image without clipping.
inline bool rect_fits(const RectSpec& r, std::size_t h, std::size_t w) noexcept {
  const std::int64_t x0 = r.cx - r.cut_w / 2;
  const std::int64_t y0 = r.cy - r.cut_h / 2;
  return x0 >= 0 && y0 >= 0 && x0 + r.cut_w <= static_cast<std::int64_t>(w) &&
         y0 + r.cut_h <= static_cast<std::int64_t>(h);
}

namespace detail {

inline void check_dims(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw ShapeError("mask dimensions must be positive");
}

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0,1]");
}

/// Mask of ones with the clipped rectangle zeroed.
inline MixMask rect_hole(std::size_t h, std::size_t w, const RectSpec& r) {
  std::vector<double> m(h * w, 1.0);
  const RectBounds b = clip_rect(r, h, w);
  for (std::size_t y = b.row0; y < b.row1; ++y) {
    for (std::size_t x = b.col0; x < b.col1; ++x) m[y * w + x] = 0.0;
  }
  return MixMask(h, w, std::move(m));
}

}  // namespace detail

/// CutMix rectangle: sides round(w*sqrt(1-lambda)) x round(h*sqrt(1-lambda))
/// at a uniformly random center, clipped to the image. Clipping makes the
/// realized area fraction kept from sample i at least lambda; use
/// corrected_lambda on the returned mask for labels.
inline std::pair<MixMask, RectSpec> rect_mask(std::size_t h, std::size_t w, double lambda, Rng& rng) {
  detail::check_dims(h, w);
  detail::check_lambda(lambda);
  const double side = std::sqrt(1.0 - lambda);
  RectSpec r;
  r.cut_w = std::llround(static_cast<double>(w) * side);
  r.cut_h = std::llround(static_cast<double>(h) * side);
  r.cx = static_cast<std::int64_t>(rng.below(w));
  r.cy = static_cast<std::int64_t>(rng.below(h));
  return {detail::rect_hole(h, w, r), r};
}

/// GridMix: an n x n partition of which exactly round(lambda * n^2) cells,
/// chosen uniformly, are set to 1.
inline MixMask grid_mask(std::size_t h, std::size_t w, std::size_t n_cells, double lambda, Rng& rng) {
  detail::check_dims(h, w);
  detail::check_lambda(lambda);
  if (n_cells == 0 || n_cells > std::min(h, w)) {
    throw ParameterError("n_cells must lie in [1, min(h, w)], got " + std::to_string(n_cells));
  }
  const std::size_t total = n_cells * n_cells;
  const auto keep = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(total)));

  std::vector<std::size_t> cells(total);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  for (std::size_t k = 0; k < keep && k + 1 < total; ++k) {
    std::swap(cells[k], cells[k + rng.below(total - k)]);
  }

  const auto rows = detail::cell_edges(h, n_cells);
  const auto cols = detail::cell_edges(w, n_cells);
  std::vector<double> m(h * w, 0.0);
  for (std::size_t k = 0; k < keep; ++k) {
    const std::size_t cr = cells[k] / n_cells;
    const std::size_t cc = cells[k] % n_cells;
    for (std::size_t y = rows[cr]; y < rows[cr + 1]; ++y) {
      for (std::size_t x = cols[cc]; x < cols[cc + 1]; ++x) m[y * w + x] = 1.0;
    }
  }
  return MixMask(h, w, std::move(m));
}

namespace detail {

inline std::vector<double> smooth_field(std::size_t h, std::size_t w, double cy, double cx, double sigma) {
  std::vector<double> m(h * w);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) + 0.5 - cy;
      const double dx = static_cast<double>(x) + 0.5 - cx;
      m[y * w + x] = 1.0 - std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  return m;
}

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// SmoothMix: m(p) = 1 - exp(-|p - c|^2 / (2 sigma^2)) around a random
/// center, sigma found by bisection so that mean(m) matches lambda.
/// The mean is decreasing in sigma. Pixel p is taken at its center.
inline MixMask smooth_mask(std::size_t h, std::size_t w, double lambda, Rng& rng) {
  detail::check_dims(h, w);
  detail::check_lambda(lambda);
  const double cx = rng.uniform(0.0, static_cast<double>(w));
  const double cy = rng.uniform(0.0, static_cast<double>(h));
  if (lambda == 0.0 || lambda == 1.0) return MixMask(h, w, lambda);

  constexpr int kMaxIterations = 60;
  constexpr double kTolerance = 1e-4;
  double lo = 1e-2;
  double hi = 10.0 * static_cast<double>(std::max(h, w));
  std::vector<double> best = detail::smooth_field(h, w, cy, cx, lo);
  double best_err = std::abs(detail::mean_of(best) - lambda);
  for (int it = 0; it < kMaxIterations && best_err > kTolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    auto field = detail::smooth_field(h, w, cy, cx, mid);
    const double mean = detail::mean_of(field);
    const double err = std::abs(mean - lambda);
    if (err < best_err) {
      best_err = err;
      best = std::move(field);
    }
    if (mean > lambda) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return MixMask(h, w, std::move(best));
}

/// Radial frequency of spectrum bin (u, v) on an h x w grid.
inline double fourier_frequency(std::size_t u, std::size_t v, std::size_t h, std::size_t w) noexcept {
  const double fu = static_cast<double>(std::min(u, h - u)) / static_cast<double>(h);
  const double fv = static_cast<double>(std::min(v, w - v)) / static_cast<double>(w);
  return std::sqrt(fu * fu + fv * fv);
}

/// Low-pass random field behind fourier_mask: complex Gaussian spectrum
/// scaled by 1/freq^decay (DC removed), conjugate-symmetrized, inverted.
inline std::vector<double> fourier_field(std::size_t h, std::size_t w, double decay, Rng& rng) {
  using detail::Complex;
  std::vector<Complex> spectrum(h * w);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      const double re = rng.normal();
      const double im = rng.normal();
      const double f = fourier_frequency(u, v, h, w);
      spectrum[u * w + v] = (f == 0.0) ? Complex{} : Complex(re, im) / std::pow(f, decay);
    }
  }
  std::vector<Complex> sym(h * w);
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t v = 0; v < w; ++v) {
      const std::size_t mu = (h - u) % h;
      const std::size_t mv = (w - v) % w;
      sym[u * w + v] = 0.5 * (spectrum[u * w + v] + std::conj(spectrum[mu * w + mv]));
    }
  }
  const auto field = detail::fft2d(std::move(sym), h, w, /*inverse=*/true);
  std::vector<double> out(h * w);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = field[k].real();
  return out;
}

/// FMix: ones on exactly the round(lambda*h*w) largest values of a
/// low-frequency random field; ties go to the earlier pixel in row-major
/// order.
inline MixMask fourier_mask(std::size_t h, std::size_t w, double lambda, double decay, Rng& rng) {
  detail::check_dims(h, w);
  detail::check_lambda(lambda);
  if (!(decay > 0.0)) throw ParameterError("decay must be positive");
  const auto field = fourier_field(h, w, decay, rng);
  const std::size_t n = h * w;
  const auto keep = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return field[a] > field[b]; });
  std::vector<double> m(n, 0.0);
  for (std::size_t k = 0; k < keep; ++k) m[order[k]] = 1.0;
  return MixMask(h, w, std::move(m));
}

/// ResizeMix paste region: a round(tau*h) x round(tau*w) hole placed
/// uniformly at random fully inside the image.
inline std::pair<MixMask, RectSpec> resize_paste_mask(std::size_t h, std::size_t w, double tau, Rng& rng) {
  detail::check_dims(h, w);
  if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("tau must lie in (0,1)");
  const std::int64_t rh = std::llround(tau * static_cast<double>(h));
  const std::int64_t rw = std::llround(tau * static_cast<double>(w));
  const auto y0 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(static_cast<std::int64_t>(h) - rh + 1)));
  const auto x0 = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(static_cast<std::int64_t>(w) - rw + 1)));
  RectSpec r{x0 + rw / 2, y0 + rh / 2, rw, rh};
  return {detail::rect_hole(h, w, r), r};
}

/// out(p, c) = m(p) x_i(p, c) + (1 - m(p)) x_j(p, c).
inline ImageTensor apply_mask(const ImageTensor& x_i, const ImageTensor& x_j, const MixMask& mask) {
  if (!x_i.same_shape(x_j)) throw ShapeError("apply_mask: images differ in shape");
  if (mask.height() != x_i.height() || mask.width() != x_i.width()) {
    throw ShapeError("apply_mask: mask does not match image size");
  }
  const std::size_t c = x_i.channels();
  std::vector<double> out(x_i.size());
  const auto a = x_i.data();
  const auto b = x_j.data();
  const auto m = mask.weights();
  for (std::size_t p = 0; p < m.size(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t k = p * c + ch;
      out[k] = std::clamp(m[p] * a[k] + (1.0 - m[p]) * b[k], 0.0, 1.0);
    }
  }
  return ImageTensor(x_i.height(), x_i.width(), c, std::move(out));
}

}  // namespace mixforge
