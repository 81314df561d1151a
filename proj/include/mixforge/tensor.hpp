#pragma once

// Value types shared by every module: images, label vectors and masks.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixforge/error.hpp"

namespace mixforge {

/// H x W x C image, row-major with interleaved channels, intensities in [0, 1].
class ImageTensor {
 public:
  ImageTensor() = default;

  /// Constant image.
  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : ImageTensor(height, width, channels, std::vector<double>(height * width * channels, fill)) {}

  ImageTensor(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (height_ == 0 || width_ == 0) throw ShapeError("image must have positive height and width");
    if (channels_ != 1 && channels_ != 3) throw ShapeError("image must have 1 or 3 channels");
    if (data_.size() != height_ * width_ * channels_) {
      throw ShapeError("image data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(height_) + "x" + std::to_string(width_) + "x" +
                       std::to_string(channels_));
    }
    for (double v : data_) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw ShapeError("image intensity outside [0,1]");
      }
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return height_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }

  double at(std::size_t row, std::size_t col, std::size_t ch) const noexcept {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double& at(std::size_t row, std::size_t col, std::size_t ch) noexcept {
    return data_[(row * width_ + col) * channels_ + ch];
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  bool same_shape(const ImageTensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// Probability vector over K classes.
class LabelVector {
 public:
  LabelVector() = default;

  explicit LabelVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ShapeError("label vector must have at least one class");
    double total = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0) throw ParameterError("label entries must be non-negative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw ParameterError("label entries must sum to 1");
  }

  static LabelVector one_hot(std::size_t num_classes, std::size_t cls) {
    if (cls >= num_classes) throw ParameterError("class index out of range");
    std::vector<double> p(num_classes, 0.0);
    p[cls] = 1.0;
    return LabelVector(std::move(p));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const noexcept { return probs_[k]; }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<double> probs_;
};

/// H x W weights in [0, 1]; 1 selects the pixel of the first sample.
class MixMask {
 public:
  MixMask() = default;

  MixMask(std::size_t height, std::size_t width, double fill)
      : height_(height), width_(width), weights_(height * width, fill) {
    validate();
  }

  MixMask(std::size_t height, std::size_t width, std::vector<double> weights)
      : height_(height), width_(width), weights_(std::move(weights)) {
    if (weights_.size() != height_ * width_) throw ShapeError("mask weight count mismatch");
    validate();
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return weights_.size(); }
  bool empty() const noexcept { return weights_.empty(); }

  double at(std::size_t row, std::size_t col) const noexcept { return weights_[row * width_ + col]; }
  double& at(std::size_t row, std::size_t col) noexcept { return weights_[row * width_ + col]; }

  std::span<const double> weights() const noexcept { return weights_; }

  bool is_binary() const noexcept {
    for (double w : weights_) {
      if (w != 0.0 && w != 1.0) return false;
    }
    return true;
  }

  /// 1 - m, pixelwise.
  MixMask complement() const {
    std::vector<double> out(weights_.size());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 1.0 - weights_[k];
    return MixMask(height_, width_, std::move(out));
  }

  friend bool operator==(const MixMask&, const MixMask&) = default;

 private:
  void validate() const {
    for (double w : weights_) {
      if (!std::isfinite(w) || w < 0.0 || w > 1.0) throw ParameterError("mask weight outside [0,1]");
    }
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> weights_;
};

namespace detail {

/// Start offsets of n cells along an axis of length len; the last cell
/// absorbs the remainder. Returns n + 1 boundaries.
inline std::vector<std::size_t> cell_edges(std::size_t len, std::size_t n) {
  std::vector<std::size_t> edges(n + 1);
  const std::size_t step = len / n;
  for (std::size_t k = 0; k < n; ++k) edges[k] = k * step;
  edges[n] = len;
  return edges;
}

}  // namespace detail

}  // namespace mixforge
