#pragma once

// Thin RAII wrapper over FFTW for the two 2-D transforms the library needs.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

namespace mixforge::detail {

using Complex = std::complex<double>;

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// In-place-style 2-D DFT of a row-major h x w complex field. `inverse`
/// selects the unnormalized backward transform; the result is divided by
/// h*w so that fft2d(fft2d(x), true) == x.
inline std::vector<Complex> fft2d(std::vector<Complex> field, std::size_t h, std::size_t w,
                                  bool inverse) {
  const std::size_t n = h * w;
  struct Deleter {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
  };
  std::unique_ptr<fftw_complex[], Deleter> in(fftw_alloc_complex(n));
  std::unique_ptr<fftw_complex[], Deleter> out(fftw_alloc_complex(n));
  if (!in || !out) throw std::bad_alloc();

  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in.get(), out.get(),
                            inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
  }
  for (std::size_t k = 0; k < n; ++k) {
    in[k][0] = field[k].real();
    in[k][1] = field[k].imag();
  }
  fftw_execute(plan);
  const double scale = inverse ? 1.0 / static_cast<double>(n) : 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    field[k] = Complex(out[k][0] * scale, out[k][1] * scale);
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return field;
}

}  // namespace mixforge::detail
