#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mixforge/masks.hpp"
#include "oracles.hpp"

using namespace mixforge;

namespace {

ImageTensor constant(std::size_t h, std::size_t w, std::size_t c, double v) { return ImageTensor(h, w, c, v); }

ImageTensor random_image(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  std::vector<double> d(h * w * c);
  for (auto& v : d) v = rng.uniform();
  return ImageTensor(h, w, c, d);
}

/// Expected clipped length of a `cut`-long interval whose start is
/// center - cut/2 with the center uniform over [0, len).
double expected_clipped_length(long len, long cut) {
  double total = 0.0;
  for (long c = 0; c < len; ++c) {
    const long a = std::max(0L, c - cut / 2);
    const long b = std::min(len, c - cut / 2 + cut);
    total += double(std::max(0L, b - a));
  }
  return total / double(len);
}

}  // namespace

TEST(RectMask, LambdaOneIsAllOnes) {
  Rng rng(1);
  const auto [m, r] = rect_mask(32, 32, 1.0, rng);
  EXPECT_EQ(r.cut_w, 0);
  EXPECT_EQ(r.cut_h, 0);
  EXPECT_EQ(clip_rect(r, 32, 32).area(), 0u);
  EXPECT_EQ(corrected_lambda(m), 1.0);
}

TEST(RectMask, SideLengthRule) {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const auto [m, r] = rect_mask(32, 32, 0.75, rng);
    EXPECT_EQ(r.cut_w, 16);
    EXPECT_EQ(r.cut_h, 16);
    EXPECT_TRUE(m.is_binary());
    if (rect_fits(r, 32, 32)) EXPECT_DOUBLE_EQ(corrected_lambda(m), 0.75);
  }
}

TEST(RectMask, UnclippedAreaClosedForm) {
  Rng rng(3);
  int fitted = 0;
  for (int k = 0; k < 2000; ++k) {
    const std::size_t h = 4 + rng.below(40), w = 4 + rng.below(40);
    const double lam = rng.uniform();
    const auto [m, r] = rect_mask(h, w, lam, rng);
    if (!rect_fits(r, h, w)) {
      EXPECT_GE(oracle::mask_mean(m), 1.0 - double(r.cut_w * r.cut_h) / double(h * w));
      continue;
    }
    ++fitted;
    EXPECT_DOUBLE_EQ(oracle::mask_mean(m), 1.0 - double(r.cut_w * r.cut_h) / double(h * w));
  }
  EXPECT_GT(fitted, 50);
}

TEST(RectMask, ClippingBiasMatchesEnumeration) {
  // Clipping can only remove cut area, so the mean corrected lambda is at
  // least the nominal 0.5. Its exact value follows from enumerating every
  // center: the clipped sides are independent along the two axes.
  const long cut = std::lround(32 * std::sqrt(0.5));
  const double lx = expected_clipped_length(32, cut);
  const double expected = 1.0 - lx * lx / 1024.0;
  Rng rng(4);
  double total = 0.0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) total += corrected_lambda(rect_mask(32, 32, 0.5, rng).first);
  const double mean = total / draws;
  EXPECT_GE(mean, 0.5);
  EXPECT_NEAR(mean, expected, 0.005);
}

TEST(GridMask, SingleCell) {
  Rng rng(5);
  EXPECT_EQ(corrected_lambda(grid_mask(16, 16, 1, 0.6, rng)), 1.0);
}

TEST(GridMask, DivisibleGridExactHalf) {
  Rng rng(6);
  const auto m = grid_mask(32, 32, 4, 0.5, rng);
  std::size_t ones = 0;
  for (std::size_t cy = 0; cy < 4; ++cy) {
    for (std::size_t cx = 0; cx < 4; ++cx) {
      const double v = m.at(cy * 8, cx * 8);
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) ASSERT_EQ(m.at(cy * 8 + y, cx * 8 + x), v);
      }
      ones += v == 1.0;
    }
  }
  EXPECT_EQ(ones, 8u);
  EXPECT_EQ(corrected_lambda(m), 0.5);
}

TEST(GridMask, NonDivisibleMatchesPixelCount) {
  Rng rng(7);
  const auto m = grid_mask(33, 33, 4, 0.25, rng);
  // Cells are 8 px with the last cell 9 px wide/high.
  std::size_t cells = 0;
  for (std::size_t cy = 0; cy < 4; ++cy) {
    for (std::size_t cx = 0; cx < 4; ++cx) cells += m.at(cy * 8, cx * 8) == 1.0;
  }
  EXPECT_EQ(cells, 4u);
  EXPECT_DOUBLE_EQ(corrected_lambda(m), double(oracle::popcount(m)) / 1089.0);
}

TEST(GridMask, RejectsTooManyCells) {
  Rng rng(8);
  EXPECT_THROW(grid_mask(8, 16, 9, 0.5, rng), ParameterError);
  EXPECT_THROW(grid_mask(8, 16, 0, 0.5, rng), ParameterError);
}

TEST(SmoothMask, Boundaries) {
  Rng rng(9);
  EXPECT_EQ(smooth_mask(32, 32, 1.0, rng), MixMask(32, 32, 1.0));
  EXPECT_EQ(smooth_mask(32, 32, 0.0, rng), MixMask(32, 32, 0.0));
}

TEST(SmoothMask, BisectionHitsMean) {
  Rng rng(10);
  for (int k = 0; k < 20; ++k) {
    const auto m = smooth_mask(32, 32, 0.7, rng);
    const double mean = oracle::mask_mean(m);
    EXPECT_GE(mean, 0.699);
    EXPECT_LE(mean, 0.701);
    for (double w : m.weights()) {
      ASSERT_GE(w, 0.0);
      ASSERT_LE(w, 1.0);
    }
  }
}

TEST(FourierMask, LambdaZero) {
  Rng rng(11);
  EXPECT_EQ(fourier_mask(32, 32, 0.0, 3.0, rng), MixMask(32, 32, 0.0));
}

TEST(FourierMask, ExactPopcount) {
  Rng rng(12);
  const auto m = fourier_mask(32, 32, 0.37, 3.0, rng);
  EXPECT_TRUE(m.is_binary());
  EXPECT_EQ(oracle::popcount(m), 379u);
}

TEST(FourierMask, Deterministic) {
  Rng a(13), b(13);
  EXPECT_EQ(fourier_mask(20, 28, 0.4, 2.5, a), fourier_mask(20, 28, 0.4, 2.5, b));
}

TEST(FourierMask, FieldIsReal) {
  // The symmetrized spectrum must invert to a real field: its forward
  // transform has conjugate symmetry.
  Rng rng(14);
  const auto field = fourier_field(12, 10, 3.0, rng);
  std::vector<detail::Complex> c(field.begin(), field.end());
  const auto spec = detail::fft2d(c, 12, 10, false);
  EXPECT_NEAR(std::abs(spec[0]), 0.0, 1e-9);  // DC removed
}

TEST(FourierMask, HigherDecayGivesLargerComponents) {
  Rng rng(15);
  double smooth = 0.0, rough = 0.0;
  for (int k = 0; k < 100; ++k) {
    smooth += double(oracle::largest_component(fourier_mask(64, 64, 0.5, 3.0, rng)));
    rough += double(oracle::largest_component(fourier_mask(64, 64, 0.5, 0.5, rng)));
  }
  EXPECT_GE(smooth / 100, rough / 100);
}

TEST(ResizePasteMask, HalfScale) {
  Rng rng(16);
  const auto [m, r] = resize_paste_mask(32, 32, 0.5, rng);
  EXPECT_EQ(r.cut_w, 16);
  EXPECT_EQ(r.cut_h, 16);
  EXPECT_TRUE(rect_fits(r, 32, 32));
  EXPECT_DOUBLE_EQ(corrected_lambda(m), 0.75);
}

TEST(ResizePasteMask, SmallestScaleRounds) {
  Rng rng(17);
  const auto [m, r] = resize_paste_mask(32, 32, 0.1, rng);
  EXPECT_EQ(r.cut_w, 3);
  EXPECT_DOUBLE_EQ(corrected_lambda(m), 1.0 - 9.0 / 1024.0);
}

TEST(ResizePasteMask, MeanOverUniformTau) {
  // Direct expectation: E[round(32 tau)^2] for tau ~ U(0.1, 0.8), by fine
  // quadrature over tau.
  const int grid = 700000;
  double expected_area = 0.0;
  for (int k = 0; k < grid; ++k) {
    const double tau = 0.1 + 0.7 * (k + 0.5) / grid;
    const double side = std::round(32.0 * tau);
    expected_area += side * side / grid;
  }
  const double expected = 1.0 - expected_area / 1024.0;
  Rng rng(18);
  double total = 0.0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    const double tau = rng.uniform(0.1, 0.8);
    total += corrected_lambda(resize_paste_mask(32, 32, tau, rng).first);
  }
  EXPECT_NEAR(total / draws, expected, 0.005);
}

TEST(ResizePasteMask, RejectsTauOutsideUnitInterval) {
  Rng rng(19);
  EXPECT_THROW(resize_paste_mask(32, 32, 0.0, rng), ParameterError);
  EXPECT_THROW(resize_paste_mask(32, 32, 1.0, rng), ParameterError);
}

TEST(ApplyMask, AllOnesGivesFirst) {
  Rng rng(20);
  const auto a = random_image(rng, 8, 9, 3);
  const auto b = random_image(rng, 8, 9, 3);
  EXPECT_EQ(apply_mask(a, b, MixMask(8, 9, 1.0)), a);
}

TEST(ApplyMask, EqualInputs) {
  Rng rng(21);
  const auto a = random_image(rng, 8, 8, 1);
  const auto m = smooth_mask(8, 8, 0.4, rng);
  const auto out = apply_mask(a, a, m);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(out.data()[k], a.data()[k], 1e-15);
}

TEST(ApplyMask, ConstantImagesMean) {
  MixMask m(16, 16, 1.0);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      if (y >= 4) m.at(y, x) = 0.0;
    }
  }
  ASSERT_EQ(corrected_lambda(m), 0.25);
  const auto out = apply_mask(constant(16, 16, 3, 0.8), constant(16, 16, 3, 0.2), m);
  double mean = 0.0;
  for (double v : out.data()) mean += v;
  EXPECT_NEAR(mean / double(out.size()), 0.25 * 0.8 + 0.75 * 0.2, 1e-12);
}

TEST(ApplyMask, ShapeMismatch) {
  EXPECT_THROW(apply_mask(constant(8, 8, 3, 0), constant(8, 8, 1, 0), MixMask(8, 8, 1.0)), ShapeError);
  EXPECT_THROW(apply_mask(constant(8, 8, 3, 0), constant(8, 8, 3, 0), MixMask(8, 7, 1.0)), ShapeError);
}

TEST(ApplyMask, ComplementDualityAndRange) {
  Rng rng(22);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_image(rng, 12, 12, 3);
    const auto b = random_image(rng, 12, 12, 3);
    const auto m = grid_mask(12, 12, 3, rng.uniform(), rng);
    EXPECT_EQ(apply_mask(a, b, m), apply_mask(b, a, m.complement()));
    const auto s = smooth_mask(12, 12, rng.uniform(), rng);
    const auto o1 = apply_mask(a, b, s);
    const auto o2 = apply_mask(b, a, s.complement());
    for (std::size_t p = 0; p < o1.size(); ++p) {
      ASSERT_NEAR(o1.data()[p], o2.data()[p], 1e-15);
      ASSERT_GE(o1.data()[p], 0.0);
      ASSERT_LE(o1.data()[p], 1.0);
    }
  }
}

TEST(MaskArea, ExactForGridAndFourier) {
  Rng rng(23);
  for (int k = 0; k < 200; ++k) {
    const std::size_t h = 4 + rng.below(30), w = 4 + rng.below(30);
    const double lam = rng.uniform();
    const auto f = fourier_mask(h, w, lam, 3.0, rng);
    EXPECT_EQ(oracle::popcount(f), std::size_t(std::llround(lam * double(h * w))));
    const std::size_t n = 1 + rng.below(std::min(h, w));
    const auto g = grid_mask(h, w, n, lam, rng);
    if (h % n == 0 && w % n == 0) {
      EXPECT_DOUBLE_EQ(corrected_lambda(g), double(std::llround(lam * double(n * n))) / double(n * n));
    }
  }
}
