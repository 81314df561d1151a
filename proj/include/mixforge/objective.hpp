#pragma once

// Losses and evaluation metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/error.hpp"
#include "mixforge/tensor.hpp"

namespace mixforge {

/// Probabilities are clamped to this floor before taking logarithms.
inline constexpr double kProbFloor = 1e-12;

/// Softmax output over K classes.
class Prediction {
 public:
  Prediction() = default;
  explicit Prediction(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ShapeError("prediction must have at least one class");
    double total = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) throw ParameterError("prediction entries must lie in [0,1]");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-6) throw ParameterError("prediction entries must sum to 1");
  }

  /// Numerically stable softmax of raw scores.
  static Prediction softmax(std::span<const double> logits) {
    if (logits.empty()) throw ShapeError("softmax of an empty vector");
    const double hi = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      p[k] = std::exp(logits[k] - hi);
      total += p[k];
    }
    for (double& v : p) v /= total;
    return Prediction(std::move(p));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const noexcept { return probs_[k]; }
  std::span<const double> probs() const noexcept { return probs_; }

  /// First index of the largest probability.
  std::size_t argmax() const noexcept {
    return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
  }
  double confidence() const noexcept { return *std::max_element(probs_.begin(), probs_.end()); }

 private:
  std::vector<double> probs_;
};

/// -sum_k y_k log p_k.
inline double cross_entropy(const Prediction& pred, const LabelVector& y) {
  if (pred.size() != y.size()) throw ShapeError("cross_entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (y[k] != 0.0) loss -= y[k] * std::log(std::max(pred[k], kProbFloor));
  }
  return loss;
}

/// lambda CE(pred, y_i) + (1 - lambda) CE(pred, y_j).
inline double mixup_cross_entropy(const Prediction& pred, const LabelVector& y_i, const LabelVector& y_j,
                                  double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0,1]");
  return lambda * cross_entropy(pred, y_i) + (1.0 - lambda) * cross_entropy(pred, y_j);
}

inline double top1_accuracy(std::span<const Prediction> preds, std::span<const std::size_t> targets) {
  if (preds.empty()) throw EmptyInputError("top1_accuracy: no predictions");
  if (preds.size() != targets.size()) throw ShapeError("top1_accuracy: length mismatch");
  std::size_t correct = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) correct += preds[k].argmax() == targets[k] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

inline constexpr std::size_t kDefaultEceBins = 15;

/// Bin of a confidence value; bins are (k/B, (k+1)/B], with 0 in bin 0.
inline std::size_t ece_bin(double confidence, std::size_t bins) noexcept {
  const double scaled = std::ceil(confidence * static_cast<double>(bins));
  const auto b = scaled <= 1.0 ? std::size_t{0} : static_cast<std::size_t>(scaled) - 1;
  return std::min(b, bins - 1);
}

/// Expected calibration error over equal-width confidence bins:
/// sum_b (n_b / N) |acc_b - conf_b|; empty bins contribute nothing.
inline double ece(std::span<const Prediction> preds, std::span<const std::size_t> targets,
                  std::size_t bins = kDefaultEceBins) {
  if (preds.empty()) throw EmptyInputError("ece: no predictions");
  if (preds.size() != targets.size()) throw ShapeError("ece: length mismatch");
  if (bins == 0) throw ParameterError("ece: bins must be >= 1");
  std::vector<double> conf_sum(bins, 0.0), hits(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const double c = preds[k].confidence();
    const std::size_t b = ece_bin(c, bins);
    conf_sum[b] += c;
    hits[b] += preds[k].argmax() == targets[k] ? 1.0 : 0.0;
    ++count[b];
  }
  double total = 0.0;
  const auto n = static_cast<double>(preds.size());
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const auto nb = static_cast<double>(count[b]);
    total += (nb / n) * std::abs(hits[b] / nb - conf_sum[b] / nb);
  }
  return total;
}

}  // namespace mixforge
