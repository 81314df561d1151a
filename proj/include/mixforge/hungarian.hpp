#pragma once

// Dense rectangular assignment (Kuhn-Munkres with potentials), O(rows^2 * cols).

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "mixforge/error.hpp"

namespace mixforge {

/// Minimum-cost assignment of every row to a distinct column of a row-major
/// rows x cols cost matrix (rows <= cols). Returns the column of each row.
inline std::vector<std::size_t> hungarian_min(std::span<const double> cost, std::size_t rows,
                                              std::size_t cols) {
  if (cost.size() != rows * cols) throw ShapeError("cost matrix size mismatch");
  if (rows > cols) throw ShapeError("assignment needs rows <= cols");
  if (rows == 0) return {};

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual start column.
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t row = 1; row <= rows; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<bool> used(cols + 1, false);
    do {
      used[col0] = true;
      const std::size_t r0 = match[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= cols; ++c) {
        if (used[c]) continue;
        const double cur = cost[(r0 - 1) * cols + (c - 1)] - u[r0] - v[c];
        if (cur < minv[c]) {
          minv[c] = cur;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= cols; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> assignment(rows, 0);
  for (std::size_t c = 1; c <= cols; ++c) {
    if (match[c] != 0) assignment[match[c] - 1] = c - 1;
  }
  return assignment;
}

/// Maximum-score variant.
inline std::vector<std::size_t> hungarian_max(std::span<const double> score, std::size_t rows,
                                              std::size_t cols) {
  std::vector<double> cost(score.size());
  for (std::size_t k = 0; k < score.size(); ++k) cost[k] = -score[k];
  return hungarian_min(cost, rows, cols);
}

}  // namespace mixforge
