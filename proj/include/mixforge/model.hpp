#pragma once

// Two-layer perceptron over flattened pixels with a softmax head. The
// hidden activation is the hook point for hidden-layer manifold mixing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/error.hpp"
#include "mixforge/objective.hpp"
#include "mixforge/rng.hpp"

namespace mixforge {

/// One training example for the model. Either a single (possibly
/// image-mixed) input, or two inputs whose hidden activations are blended
/// as hidden_lambda * h(a) + (1 - hidden_lambda) * h(b). The loss is
/// lambda CE(p, y_i) + (1 - lambda) CE(p, y_j).
struct ModelSample {
  std::span<const double> input;
  std::span<const double> partner;  // empty unless mixing at the hidden layer
  double hidden_lambda = 1.0;
  const LabelVector* y_i = nullptr;
  const LabelVector* y_j = nullptr;
  double lambda = 1.0;
};

class TinyModel {
 public:
  TinyModel(std::size_t inputs, std::size_t hidden, std::size_t classes, std::uint64_t seed)
      : inputs_(inputs), hidden_(hidden), classes_(classes) {
    if (inputs == 0 || hidden == 0 || classes == 0) throw ParameterError("model dimensions must be positive");
    params_.assign(hidden * inputs + hidden + classes * hidden + classes, 0.0);
    Rng rng = Rng::stream(seed, 0x6d6f64656cULL);
    const double s1 = std::sqrt(6.0 / static_cast<double>(inputs));
    const double s2 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
    for (std::size_t k = 0; k < hidden * inputs; ++k) params_[k] = rng.uniform(-s1, s1);
    const std::size_t w2 = w2_offset();
    for (std::size_t k = 0; k < classes * hidden; ++k) params_[w2 + k] = rng.uniform(-s2, s2);
  }

  std::size_t inputs() const noexcept { return inputs_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t classes() const noexcept { return classes_; }
  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  /// ReLU hidden activation; `pre` receives the pre-activation if given.
  std::vector<double> hidden_activation(std::span<const double> x, std::vector<double>* pre = nullptr) const {
    if (x.size() != inputs_) throw ShapeError("model input has wrong length");
    std::vector<double> h(hidden_);
    if (pre) pre->resize(hidden_);
    const double* w1 = params_.data();
    const double* b1 = params_.data() + b1_offset();
    for (std::size_t u = 0; u < hidden_; ++u) {
      double acc = b1[u];
      const double* row = w1 + u * inputs_;
      for (std::size_t d = 0; d < inputs_; ++d) acc += row[d] * x[d];
      if (pre) (*pre)[u] = acc;
      h[u] = acc > 0.0 ? acc : 0.0;
    }
    return h;
  }

  std::vector<double> logits_from_hidden(std::span<const double> h) const {
    std::vector<double> z(classes_);
    const double* w2 = params_.data() + w2_offset();
    const double* b2 = params_.data() + b2_offset();
    for (std::size_t k = 0; k < classes_; ++k) {
      double acc = b2[k];
      const double* row = w2 + k * hidden_;
      for (std::size_t u = 0; u < hidden_; ++u) acc += row[u] * h[u];
      z[k] = acc;
    }
    return z;
  }

  Prediction predict(std::span<const double> x) const {
    return Prediction::softmax(logits_from_hidden(hidden_activation(x)));
  }

  /// Mean mixup cross-entropy over the batch; accumulates the mean gradient
  /// into `grad` (resized and zeroed) when given.
  double loss_and_grad(std::span<const ModelSample> batch, std::vector<double>* grad) const {
    if (batch.empty()) throw EmptyInputError("empty training batch");
    if (grad) grad->assign(params_.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    const double* w2 = params_.data() + w2_offset();
    double total = 0.0;
    std::vector<double> pre_a, pre_b;
    for (const ModelSample& s : batch) {
      const bool two = !s.partner.empty();
      auto h = hidden_activation(s.input, &pre_a);
      std::vector<double> h_b;
      if (two) {
        h_b = hidden_activation(s.partner, &pre_b);
        for (std::size_t u = 0; u < hidden_; ++u) {
          h[u] = s.hidden_lambda * h[u] + (1.0 - s.hidden_lambda) * h_b[u];
        }
      }
      const auto z = logits_from_hidden(h);
      // Blown-up parameters: report a non-finite loss and let the caller decide.
      if (!std::all_of(z.begin(), z.end(), [](double v) { return std::isfinite(v); })) {
        return std::numeric_limits<double>::quiet_NaN();
      }
      const Prediction p = Prediction::softmax(z);
      total += mixup_cross_entropy(p, *s.y_i, *s.y_j, s.lambda);
      if (!grad) continue;

      double* g = grad->data();
      // d loss / d logits = p - (lambda y_i + (1 - lambda) y_j).
      std::vector<double> dz(classes_);
      for (std::size_t k = 0; k < classes_; ++k) {
        dz[k] = (p[k] - (s.lambda * (*s.y_i)[k] + (1.0 - s.lambda) * (*s.y_j)[k])) * inv_n;
      }
      std::vector<double> dh(hidden_, 0.0);
      for (std::size_t k = 0; k < classes_; ++k) {
        double* gw2 = g + w2_offset() + k * hidden_;
        const double* row = w2 + k * hidden_;
        for (std::size_t u = 0; u < hidden_; ++u) {
          gw2[u] += dz[k] * h[u];
          dh[u] += dz[k] * row[u];
        }
        g[b2_offset() + k] += dz[k];
      }
      const auto backprop_input = [&](std::span<const double> x, const std::vector<double>& pre, double scale) {
        for (std::size_t u = 0; u < hidden_; ++u) {
          if (pre[u] <= 0.0) continue;
          const double d = dh[u] * scale;
          double* gw1 = g + u * inputs_;
          for (std::size_t i = 0; i < inputs_; ++i) gw1[i] += d * x[i];
          g[b1_offset() + u] += d;
        }
      };
      if (two) {
        backprop_input(s.input, pre_a, s.hidden_lambda);
        backprop_input(s.partner, pre_b, 1.0 - s.hidden_lambda);
      } else {
        backprop_input(s.input, pre_a, 1.0);
      }
    }
    return total * inv_n;
  }

  void sgd_step(std::span<const double> grad, double lr) {
    for (std::size_t k = 0; k < params_.size(); ++k) params_[k] -= lr * grad[k];
  }

 private:
  std::size_t b1_offset() const noexcept { return hidden_ * inputs_; }
  std::size_t w2_offset() const noexcept { return b1_offset() + hidden_; }
  std::size_t b2_offset() const noexcept { return w2_offset() + classes_ * hidden_; }

  std::size_t inputs_;
  std::size_t hidden_;
  std::size_t classes_;
  std::vector<double> params_;
};

}  // namespace mixforge
