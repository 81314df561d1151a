#pragma once

// Mixing-ratio sampling, in-batch pairing and the two label-mixing rules.
//
// Orientation convention used throughout the library: lambda is the weight
// of the first sample i. A mask weight of 1 takes the pixel from i.

#include <cstddef>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "mixforge/error.hpp"
#include "mixforge/rng.hpp"
#include "mixforge/tensor.hpp"

namespace mixforge {

struct MixRatio {
  double lambda = 1.0;
  double alpha = 1.0;
};

struct PairIndex {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const PairIndex&, const PairIndex&) = default;
};

struct MixResult {
  ImageTensor image;
  LabelVector label;
  double lambda_nominal = 1.0;
  double lambda_effective = 1.0;
  std::optional<MixMask> mask;
};

/// Draws lambda ~ Beta(alpha, alpha). The raw draw is returned; there is no
/// max(lambda, 1 - lambda) folding.
inline MixRatio sample_lambda(double alpha, Rng& rng) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ParameterError("alpha must be positive, got " + std::to_string(alpha));
  }
  return MixRatio{rng.beta(alpha, alpha), alpha};
}

/// Pairs every index i with sigma(i) for a uniformly random permutation sigma
/// (Fisher-Yates). Fixed points are allowed.
inline std::vector<PairIndex> make_pairs(std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw EmptyInputError("cannot pair an empty batch");
  std::vector<std::size_t> perm(batch_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t k = batch_size - 1; k > 0; --k) {
    std::swap(perm[k], perm[rng.below(k + 1)]);
  }
  std::vector<PairIndex> pairs(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) pairs[k] = {k, perm[k]};
  return pairs;
}

inline LabelVector mix_labels_linear(const LabelVector& y_i, const LabelVector& y_j, double lambda) {
  if (y_i.size() != y_j.size()) {
    throw ShapeError("label length mismatch: " + std::to_string(y_i.size()) + " vs " +
                     std::to_string(y_j.size()));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0,1]");
  std::vector<double> out(y_i.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = lambda * y_i[k] + (1.0 - lambda) * y_j[k];
  }
  return LabelVector(std::move(out));
}

/// Area-corrected lambda: the fraction of the mask taken from sample i.
inline double corrected_lambda(const MixMask& mask) {
  if (mask.empty()) throw ShapeError("cannot take the mean of an empty mask");
  double total = 0.0;
  for (double w : mask.weights()) total += w;
  return total / static_cast<double>(mask.size());
}

}  // namespace mixforge
