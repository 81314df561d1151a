#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "mixforge/saliency.hpp"
#include "mixforge/rng.hpp"

using namespace mixforge;

namespace {

ImageTensor random_image(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  std::vector<double> d(h * w * c);
  for (auto& v : d) v = rng.uniform();
  return ImageTensor(h, w, c, d);
}

double map_sum(const SaliencyMap& s) {
  double t = 0.0;
  for (double v : s.values()) t += v;
  return t;
}

/// Unnormalized Sobel magnitude by explicit kernel tables.
std::vector<double> sobel_oracle(const std::vector<double>& lum, long h, long w) {
  const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
  std::vector<double> out(std::size_t(h * w));
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double gx = 0, gy = 0;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const long yy = std::min(std::max(y + a - 1, 0L), h - 1);
          const long xx = std::min(std::max(x + b - 1, 0L), w - 1);
          gx += kx[a][b] * lum[std::size_t(yy * w + xx)];
          gy += ky[a][b] * lum[std::size_t(yy * w + xx)];
        }
      }
      out[std::size_t(y * w + x)] = std::hypot(gx, gy);
    }
  }
  return out;
}

/// Naive O(n^4) DFT; sign -1 forward, +1 inverse (unnormalized).
std::vector<std::complex<double>> naive_dft(const std::vector<std::complex<double>>& in, long h, long w, int sign) {
  std::vector<std::complex<double>> out(in.size());
  for (long u = 0; u < h; ++u) {
    for (long v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
          const double ang = sign * 2.0 * std::numbers::pi * (double(u * y) / double(h) + double(v * x) / double(w));
          acc += in[std::size_t(y * w + x)] * std::polar(1.0, ang);
        }
      }
      out[std::size_t(u * w + v)] = acc;
    }
  }
  return out;
}

/// Spectral residual written out directly: DFT, log amplitude minus 3x3
/// replicated mean, inverse DFT, squared magnitude, Gaussian blur (sigma
/// 2.5, radius 8, replicated), normalized.
std::vector<double> spectral_residual_oracle(const std::vector<double>& lum, long h, long w) {
  std::vector<std::complex<double>> f(lum.begin(), lum.end());
  const auto spec = naive_dft(f, h, w, -1);
  std::vector<double> la(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) la[k] = std::log(std::max(std::abs(spec[k]), 1e-12));
  std::vector<std::complex<double>> res(spec.size());
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double m = 0;
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dx = -1; dx <= 1; ++dx) {
          m += la[std::size_t(std::clamp(y + dy, 0L, h - 1) * w + std::clamp(x + dx, 0L, w - 1))];
        }
      }
      const std::size_t k = std::size_t(y * w + x);
      res[k] = std::polar(std::exp(la[k] - m / 9.0), std::arg(spec[k]));
    }
  }
  const auto back = naive_dft(res, h, w, +1);
  std::vector<double> e(back.size());
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = std::norm(back[k] / double(h * w));
  const long r = 8;
  std::vector<double> out(e.size(), 0.0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0, norm = 0;
      for (long a = -r; a <= r; ++a) {
        for (long b = -r; b <= r; ++b) {
          const double g = std::exp(-double(a * a + b * b) / (2 * 2.5 * 2.5));
          norm += g;
          acc += g * e[std::size_t(std::clamp(y + a, 0L, h - 1) * w + std::clamp(x + b, 0L, w - 1))];
        }
      }
      out[std::size_t(y * w + x)] = acc / norm;
    }
  }
  double t = 0;
  for (double v : out) t += v;
  for (double& v : out) v /= t;
  return out;
}

}  // namespace

TEST(Sobel, ConstantImageIsUniform) {
  const auto s = sobel_saliency(ImageTensor(8, 12, 3, 0.4));
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 96.0);
}

TEST(Sobel, StepEdgeArgmax) {
  ImageTensor x(32, 32, 1, 0.0);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t c = 16; c < 32; ++c) x.at(y, c, 0) = 1.0;
  }
  const auto s = sobel_saliency(x);
  const std::size_t col = s.argmax() % 32;
  EXPECT_TRUE(col == 15 || col == 16) << col;
}

TEST(Sobel, MatchesConvolutionOracle) {
  Rng rng(1);
  const auto x = random_image(rng, 13, 17, 3);
  const auto raw = sobel_oracle(luminance(x), 13, 17);
  double t = 0;
  for (double v : raw) t += v;
  const auto s = sobel_saliency(x);
  for (std::size_t k = 0; k < raw.size(); ++k) EXPECT_NEAR(s.values()[k], raw[k] / t, 1e-14);
}

TEST(Sobel, RandomMapsSumToOne) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto s = sobel_saliency(random_image(rng, 5 + rng.below(20), 5 + rng.below(20), 3));
    EXPECT_NEAR(map_sum(s), 1.0, 1e-6);
    for (double v : s.values()) ASSERT_GE(v, 0.0);
  }
}

TEST(Sobel, TranslationEquivariance) {
  // A bright 3x3 blob on a dark background, shifted by k with zero padding.
  for (std::size_t k : {1u, 3u, 5u}) {
    ImageTensor a(24, 24, 1, 0.0), b(24, 24, 1, 0.0);
    for (std::size_t y = 8; y < 11; ++y) {
      for (std::size_t x = 6; x < 9; ++x) {
        a.at(y, x, 0) = 1.0;
        a.at(y + 1, x + 2, 0) = 0.5;
        b.at(y + k, x + k, 0) = 1.0;
        b.at(y + k + 1, x + k + 2, 0) = 0.5;
      }
    }
    const auto ia = sobel_saliency(a).argmax();
    const auto ib = sobel_saliency(b).argmax();
    EXPECT_EQ(ib / 24, ia / 24 + k);
    EXPECT_EQ(ib % 24, ia % 24 + k);
  }
}

TEST(SpectralResidual, ConstantImageIsUniform) {
  const auto s = spectral_residual_saliency(ImageTensor(16, 16, 1, 0.7));
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 256.0);
}

TEST(SpectralResidual, BrightPixelPeak) {
  for (std::size_t py : {3u, 8u, 12u}) {
    for (std::size_t px : {2u, 9u, 14u}) {
      ImageTensor x(16, 16, 1, 0.0);
      x.at(py, px, 0) = 1.0;
      const auto am = spectral_residual_saliency(x).argmax();
      const auto ay = long(am / 16), ax = long(am % 16);
      EXPECT_LE(std::labs(ay - long(py)), 2);
      EXPECT_LE(std::labs(ax - long(px)), 2);
    }
  }
}

TEST(SpectralResidual, MatchesDirectPipeline) {
  Rng rng(3);
  const auto x = random_image(rng, 16, 16, 3);
  const auto expected = spectral_residual_oracle(luminance(x), 16, 16);
  const auto s = spectral_residual_saliency(x);
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(s.values()[k], expected[k], 1e-10);
  EXPECT_NEAR(map_sum(s), 1.0, 1e-6);
}

TEST(SaliencyMap, RejectsNegative) {
  EXPECT_THROW(SaliencyMap(1, 2, {0.5, -0.1}), ParameterError);
  EXPECT_THROW(SaliencyMap(2, 2, {0.5, 0.5}), ShapeError);
}

TEST(BlockReduce, SingleBlock) {
  Rng rng(4);
  const auto g = block_reduce(sobel_saliency(random_image(rng, 9, 7, 1)), 1);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_NEAR(g[0], 1.0, 1e-12);
}

TEST(BlockReduce, UniformQuarters) {
  const auto g = block_reduce(SaliencyMap(32, 32, std::vector<double>(1024, 1.0)), 2);
  for (double v : g) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(BlockReduce, MatchesBruteForce) {
  Rng rng(5);
  std::vector<double> raw(30 * 27);
  for (auto& v : raw) v = rng.uniform();
  const SaliencyMap s(30, 27, raw);
  const auto g = block_reduce(s, 4);
  // Blocks: rows 7,7,7,9 and cols 6,6,6,9 with the remainder in the last block.
  double total = 0.0;
  for (std::size_t br = 0; br < 4; ++br) {
    for (std::size_t bc = 0; bc < 4; ++bc) {
      double acc = 0.0;
      for (std::size_t y = 0; y < 30; ++y) {
        for (std::size_t x = 0; x < 27; ++x) {
          if (std::min<std::size_t>(y / 7, 3) == br && std::min<std::size_t>(x / 6, 3) == bc) acc += s.at(y, x);
        }
      }
      EXPECT_NEAR(g[br * 4 + bc], acc, 1e-12);
      total += g[br * 4 + bc];
    }
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(BlockReduce, OutOfRange) {
  const SaliencyMap s(4, 6, std::vector<double>(24, 1.0));
  EXPECT_THROW(block_reduce(s, 0), ParameterError);
  EXPECT_THROW(block_reduce(s, 5), ParameterError);
}
