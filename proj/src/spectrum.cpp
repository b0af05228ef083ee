#include "gdrift/spectrum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace gdrift {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

double signed_frequency(std::size_t k, std::size_t n) {
  const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
  return kk / static_cast<double>(n);
}

}  // namespace

std::vector<double> radial_power_spectrum(const Volume& residual, std::size_t bands) {
  if (bands < 2) throw std::invalid_argument("radial_power_spectrum: bands must be at least 2");
  const Dims3 d = residual.dims();
  if (d.count() == 0) throw std::invalid_argument("radial_power_spectrum: empty volume");
  const std::size_t n = d.count();
  std::unique_ptr<fftw_complex, FftwFree> buf(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n)));
  if (!buf) throw std::bad_alloc();
  fftw_plan plan = fftw_plan_dft_3d(static_cast<int>(d.d), static_cast<int>(d.h), static_cast<int>(d.w), buf.get(),
                                    buf.get(), FFTW_FORWARD, FFTW_ESTIMATE);
  const auto src = residual.data();
  for (std::size_t i = 0; i < n; ++i) {
    buf.get()[i][0] = src[i];
    buf.get()[i][1] = 0.0;
  }
  fftw_execute(plan);
  fftw_destroy_plan(plan);

  std::vector<double> out(bands, 0.0);
  const double inv = 1.0 / static_cast<double>(n);
  std::size_t i = 0;
  for (std::size_t z = 0; z < d.d; ++z) {
    const double fz = signed_frequency(z, d.d);
    for (std::size_t y = 0; y < d.h; ++y) {
      const double fy = signed_frequency(y, d.h);
      for (std::size_t x = 0; x < d.w; ++x, ++i) {
        const double fx = signed_frequency(x, d.w);
        const double r = std::sqrt(fz * fz + fy * fy + fx * fx);
        const auto band = std::min(bands - 1, static_cast<std::size_t>(r / 0.5 * static_cast<double>(bands)));
        const double re = buf.get()[i][0];
        const double im = buf.get()[i][1];
        out[band] += (re * re + im * im) * inv;
      }
    }
  }
  return out;
}

}  // namespace gdrift
