#pragma once

// Classical saliency detectors used by the guided and transported cutting
// policies. Every map is a probability distribution over pixels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mixforge/error.hpp"
#include "mixforge/fft.hpp"
#include "mixforge/tensor.hpp"

namespace mixforge {

class SaliencyMap {
 public:
  SaliencyMap() = default;

  /// Normalizes `raw` to sum 1. An all-zero map becomes uniform.
  SaliencyMap(std::size_t height, std::size_t width, std::vector<double> raw)
      : height_(height), width_(width), values_(std::move(raw)) {
    if (height_ == 0 || width_ == 0 || values_.size() != height_ * width_) {
      throw ShapeError("saliency map shape mismatch");
    }
    double total = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v) || v < 0.0) throw ParameterError("saliency values must be finite and >= 0");
      total += v;
    }
    if (total > 0.0) {
      for (double& v : values_) v /= total;
    } else {
      std::fill(values_.begin(), values_.end(), 1.0 / static_cast<double>(values_.size()));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  double at(std::size_t row, std::size_t col) const noexcept { return values_[row * width_ + col]; }
  std::span<const double> values() const noexcept { return values_; }

  /// Row-major index of the first maximal value.
  std::size_t argmax() const noexcept {
    return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> values_;
};

/// 0.299 R + 0.587 G + 0.114 B, or the single channel as-is.
inline std::vector<double> luminance(const ImageTensor& x) {
  std::vector<double> lum(x.pixels());
  const auto d = x.data();
  if (x.channels() == 1) {
    std::copy(d.begin(), d.end(), lum.begin());
  } else {
    for (std::size_t p = 0; p < lum.size(); ++p) {
      lum[p] = 0.299 * d[3 * p] + 0.587 * d[3 * p + 1] + 0.114 * d[3 * p + 2];
    }
  }
  return lum;
}

/// Sobel gradient magnitude of the luminance, replicated borders.
inline SaliencyMap sobel_saliency(const ImageTensor& x) {
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const auto lum = luminance(x);
  const auto px = [&](std::ptrdiff_t r, std::ptrdiff_t c) {
    r = std::clamp<std::ptrdiff_t>(r, 0, static_cast<std::ptrdiff_t>(h) - 1);
    c = std::clamp<std::ptrdiff_t>(c, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return lum[static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)];
  };
  std::vector<double> mag(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t xx = 0; xx < w; ++xx) {
      const auto r = static_cast<std::ptrdiff_t>(y);
      const auto c = static_cast<std::ptrdiff_t>(xx);
      const double gx = (px(r - 1, c + 1) + 2.0 * px(r, c + 1) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2.0 * px(r, c - 1) + px(r + 1, c - 1));
      const double gy = (px(r + 1, c - 1) + 2.0 * px(r + 1, c) + px(r + 1, c + 1)) -
                        (px(r - 1, c - 1) + 2.0 * px(r - 1, c) + px(r - 1, c + 1));
      mag[y * w + xx] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return SaliencyMap(h, w, std::move(mag));
}

namespace detail {

/// Separable Gaussian blur with replicated borders, radius ceil(3 sigma).
inline std::vector<double> gaussian_blur(const std::vector<double>& src, std::size_t h, std::size_t w,
                                         double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-static_cast<double>(k * k) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;

  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);
  std::vector<double> tmp(h * w, 0.0);
  std::vector<double> out(h * w, 0.0);
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + k, 0, iw - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * src[static_cast<std::size_t>(y * iw + xx)];
      }
      tmp[static_cast<std::size_t>(y * iw + x)] = acc;
    }
  }
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + k, 0, ih - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(yy * iw + x)];
      }
      out[static_cast<std::size_t>(y * iw + x)] = acc;
    }
  }
  return out;
}

/// 3x3 mean filter with replicated borders.
inline std::vector<double> box3(const std::vector<double>& src, std::size_t h, std::size_t w) {
  const auto ih = static_cast<std::ptrdiff_t>(h);
  const auto iw = static_cast<std::ptrdiff_t>(w);
  std::vector<double> out(h * w);
  for (std::ptrdiff_t y = 0; y < ih; ++y) {
    for (std::ptrdiff_t x = 0; x < iw; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + dy, 0, ih - 1);
          const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + dx, 0, iw - 1);
          acc += src[static_cast<std::size_t>(yy * iw + xx)];
        }
      }
      out[static_cast<std::size_t>(y * iw + x)] = acc / 9.0;
    }
  }
  return out;
}

}  // namespace detail

inline constexpr double kSpectralResidualSigma = 2.5;

/// Spectral residual saliency: log-amplitude minus its 3x3 local mean,
/// recombined with the original phase, inverted, squared and blurred.
/// A constant image has no residual and yields the uniform map.
inline SaliencyMap spectral_residual_saliency(const ImageTensor& x) {
  using detail::Complex;
  const std::size_t h = x.height();
  const std::size_t w = x.width();
  const auto lum = luminance(x);
  const auto [lo, hi] = std::minmax_element(lum.begin(), lum.end());
  if (*lo == *hi) return SaliencyMap(h, w, std::vector<double>(h * w, 0.0));

  std::vector<Complex> field(h * w);
  for (std::size_t k = 0; k < field.size(); ++k) field[k] = Complex(lum[k], 0.0);
  const auto spectrum = detail::fft2d(std::move(field), h, w, /*inverse=*/false);

  std::vector<double> log_amp(h * w);
  std::vector<double> phase(h * w);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    log_amp[k] = std::log(std::max(std::abs(spectrum[k]), 1e-12));
    phase[k] = std::arg(spectrum[k]);
  }
  const auto smoothed = detail::box3(log_amp, h, w);
  std::vector<Complex> residual(h * w);
  for (std::size_t k = 0; k < residual.size(); ++k) {
    residual[k] = std::polar(std::exp(log_amp[k] - smoothed[k]), phase[k]);
  }
  const auto back = detail::fft2d(std::move(residual), h, w, /*inverse=*/true);
  std::vector<double> energy(h * w);
  for (std::size_t k = 0; k < back.size(); ++k) energy[k] = std::norm(back[k]);
  auto blurred = detail::gaussian_blur(energy, h, w, kSpectralResidualSigma);
  for (double& v : blurred) v = std::max(v, 0.0);
  return SaliencyMap(h, w, std::move(blurred));
}

enum class SaliencyDetector { sobel, spectral_residual };

inline SaliencyMap compute_saliency(const ImageTensor& x, SaliencyDetector detector) {
  return detector == SaliencyDetector::sobel ? sobel_saliency(x) : spectral_residual_saliency(x);
}

/// b x b grid of block masses; remainder pixels belong to the trailing
/// blocks. Row-major, sums to 1.
inline std::vector<double> block_reduce(const SaliencyMap& s, std::size_t blocks) {
  if (blocks == 0 || blocks > std::min(s.height(), s.width())) {
    throw ParameterError("block count must lie in [1, min(h, w)], got " + std::to_string(blocks));
  }
  const auto rows = detail::cell_edges(s.height(), blocks);
  const auto cols = detail::cell_edges(s.width(), blocks);
  std::vector<double> grid(blocks * blocks, 0.0);
  for (std::size_t br = 0; br < blocks; ++br) {
    for (std::size_t bc = 0; bc < blocks; ++bc) {
      double acc = 0.0;
      for (std::size_t y = rows[br]; y < rows[br + 1]; ++y) {
        for (std::size_t x = cols[bc]; x < cols[bc + 1]; ++x) acc += s.at(y, x);
      }
      grid[br * blocks + bc] = acc;
    }
  }
  return grid;
}

}  // namespace mixforge
