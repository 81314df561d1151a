#pragma once

// Block-level optimal-transported cutting.
//
// A reduced reconstruction of saliency-maximizing mixup on a b x b block
// grid:
//   1. choose exactly k = round(lambda * b^2) blocks to keep from image i so
//      that the saliency kept from i plus the saliency of the j-blocks left
//      in place is maximal;
//   2. move donor blocks of j onto the positions filled from j, injectively
//      and within a Chebyshev radius, maximizing the donor saliency carried.
//
// Step 1 is solved exactly by sorting. The objective
//   sum_{p kept} s_i(p) + sum_{p dropped} s_j(p)
//     = sum_p s_j(p) + sum_{p kept} (s_i(p) - s_j(p))
// is a constant plus a separable sum over kept blocks, so any k-subset is
// beaten by the k largest differences.
//
// Step 2 is a rectangular assignment solved with the Hungarian method.
// Moves outside the radius get a sentinel score below any feasible total.
//
// The Lagrangian / submodular machinery of the original method is not
// reproduced.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <vector>

#include "mixforge/core.hpp"
#include "mixforge/error.hpp"
#include "mixforge/hungarian.hpp"
#include "mixforge/masks.hpp"
#include "mixforge/saliency.hpp"
#include "mixforge/tensor.hpp"

namespace mixforge {

struct BlockGrid {
  std::size_t blocks = 0;
  std::vector<double> sal_i;  // row-major, blocks x blocks
  std::vector<double> sal_j;
};

/// Donor blocks of image j moved onto the positions filled from j.
struct TransportPlan {
  std::vector<std::size_t> targets;  // ascending block indices with mask 0
  std::vector<std::size_t> sources;  // donor block for each target
  std::size_t max_shift = 0;
  bool fell_back = false;            // infeasible assignment, identity used
  double transported = 0.0;          // sum of donor saliency carried
};

struct PuzzleParams {
  std::size_t blocks = 4;
  std::size_t max_shift = 1;
  SaliencyDetector detector = SaliencyDetector::sobel;
};

inline std::size_t chebyshev(std::size_t a, std::size_t b, std::size_t blocks) noexcept {
  const auto ar = static_cast<std::ptrdiff_t>(a / blocks), ac = static_cast<std::ptrdiff_t>(a % blocks);
  const auto br = static_cast<std::ptrdiff_t>(b / blocks), bc = static_cast<std::ptrdiff_t>(b % blocks);
  return static_cast<std::size_t>(std::max(std::abs(ar - br), std::abs(ac - bc)));
}

/// Binary b x b mask (1 = keep block from i) with exactly round(lambda b^2)
/// ones. Ties in (sal_i - sal_j) go to the lower block index.
inline std::vector<std::uint8_t> optimize_block_mask(const BlockGrid& grid, double lambda) {
  const std::size_t n = grid.blocks * grid.blocks;
  if (grid.blocks == 0 || grid.sal_i.size() != n || grid.sal_j.size() != n) {
    throw ShapeError("block grid size mismatch");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0,1]");
  const auto keep = static_cast<std::size_t>(std::llround(lambda * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grid.sal_i[a] - grid.sal_j[a] > grid.sal_i[b] - grid.sal_j[b];
  });
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t k = 0; k < keep; ++k) mask[order[k]] = 1;
  return mask;
}

/// Value of the block-selection objective for a given mask.
inline double block_mask_objective(const BlockGrid& grid, const std::vector<std::uint8_t>& mask) {
  double total = 0.0;
  for (std::size_t p = 0; p < mask.size(); ++p) total += mask[p] ? grid.sal_i[p] : grid.sal_j[p];
  return total;
}

inline TransportPlan transport_blocks(const std::vector<double>& sal_j, const std::vector<std::uint8_t>& mask,
                                      std::size_t blocks, std::size_t max_shift) {
  const std::size_t n = blocks * blocks;
  if (blocks == 0 || sal_j.size() != n || mask.size() != n) throw ShapeError("block grid size mismatch");

  TransportPlan plan;
  plan.max_shift = max_shift;
  for (std::size_t p = 0; p < n; ++p) {
    if (!mask[p]) plan.targets.push_back(p);
  }
  const std::size_t m = plan.targets.size();
  plan.sources = plan.targets;
  if (m == 0 || max_shift == 0) {
    for (std::size_t s : plan.sources) plan.transported += sal_j[s];
    return plan;
  }

  // Saliencies are block masses in [0, 1]; a feasible total is at most 1.
  constexpr double kForbidden = -1e9;
  // Breaks exact ties toward leaving a block in place.
  constexpr double kStayBonus = 1e-12;
  std::vector<double> score(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t t = plan.targets[r];
      score[r * n + s] = chebyshev(t, s, blocks) <= max_shift ? sal_j[s] + (s == t ? kStayBonus : 0.0)
                                                              : kForbidden;
    }
  }
  const auto assignment = hungarian_max(score, m, n);
  bool feasible = true;
  for (std::size_t r = 0; r < m; ++r) {
    if (chebyshev(plan.targets[r], assignment[r], blocks) > max_shift) feasible = false;
  }
  if (feasible) {
    plan.sources = assignment;
    // The objective only sees the set of donors, so moved blocks can be
    // permuted freely. Pair them in ascending order when the radius allows,
    // making the plan independent of solver internals.
    std::vector<std::size_t> moved_rows, moved_sources;
    for (std::size_t r = 0; r < m; ++r) {
      if (plan.sources[r] != plan.targets[r]) {
        moved_rows.push_back(r);
        moved_sources.push_back(plan.sources[r]);
      }
    }
    std::sort(moved_sources.begin(), moved_sources.end());
    bool sorted_ok = true;
    for (std::size_t k = 0; k < moved_rows.size(); ++k) {
      if (chebyshev(plan.targets[moved_rows[k]], moved_sources[k], blocks) > max_shift) sorted_ok = false;
    }
    if (sorted_ok) {
      for (std::size_t k = 0; k < moved_rows.size(); ++k) plan.sources[moved_rows[k]] = moved_sources[k];
    }
  } else {
    plan.fell_back = true;
  }
  for (std::size_t s : plan.sources) plan.transported += sal_j[s];
  return plan;
}

/// Saliency-guided block mix of x_i and x_j. Kept blocks come from x_i; the
/// remaining positions receive transported blocks of x_j.
inline MixResult puzzle_mix(const ImageTensor& x_i, const ImageTensor& x_j, const LabelVector& y_i,
                            const LabelVector& y_j, double lambda, const PuzzleParams& params) {
  if (!x_i.same_shape(x_j)) throw ShapeError("puzzle_mix: images differ in shape");
  const std::size_t h = x_i.height();
  const std::size_t w = x_i.width();
  const std::size_t b = params.blocks;
  if (b == 0 || b > std::min(h, w)) {
    throw ParameterError("puzzle_mix: block count " + std::to_string(b) + " exceeds image size");
  }

  BlockGrid grid{b, block_reduce(compute_saliency(x_i, params.detector), b),
                 block_reduce(compute_saliency(x_j, params.detector), b)};
  const auto block_mask = optimize_block_mask(grid, lambda);
  const auto plan = transport_blocks(grid.sal_j, block_mask, b, params.max_shift);

  const auto rows = detail::cell_edges(h, b);
  const auto cols = detail::cell_edges(w, b);
  const std::size_t c = x_i.channels();

  // x_j with donor blocks moved to their targets; blocks of unequal size
  // (remainder rows/cols) clamp the source offset.
  ImageTensor moved = x_j;
  for (std::size_t k = 0; k < plan.targets.size(); ++k) {
    const std::size_t t = plan.targets[k];
    const std::size_t s = plan.sources[k];
    const std::size_t tr = t / b, tc = t % b, sr = s / b, sc = s % b;
    const std::size_t src_rows = rows[sr + 1] - rows[sr];
    const std::size_t src_cols = cols[sc + 1] - cols[sc];
    for (std::size_t y = rows[tr]; y < rows[tr + 1]; ++y) {
      const std::size_t sy = rows[sr] + std::min(y - rows[tr], src_rows - 1);
      for (std::size_t x = cols[tc]; x < cols[tc + 1]; ++x) {
        const std::size_t sx = cols[sc] + std::min(x - cols[tc], src_cols - 1);
        for (std::size_t ch = 0; ch < c; ++ch) moved.at(y, x, ch) = x_j.at(sy, sx, ch);
      }
    }
  }

  std::vector<double> pixel_mask(h * w, 0.0);
  for (std::size_t p = 0; p < b * b; ++p) {
    if (!block_mask[p]) continue;
    for (std::size_t y = rows[p / b]; y < rows[p / b + 1]; ++y) {
      for (std::size_t x = cols[p % b]; x < cols[p % b + 1]; ++x) pixel_mask[y * w + x] = 1.0;
    }
  }
  MixMask mask(h, w, std::move(pixel_mask));
  const double lam_eff = corrected_lambda(mask);
  return MixResult{apply_mask(x_i, moved, mask), mix_labels_linear(y_i, y_j, lam_eff), lambda, lam_eff,
                   std::move(mask)};
}

}  // namespace mixforge
