#include "gdrift/phantom.hpp"

#include "gdrift/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace gdrift {
namespace {

void blur_axis(const Volume& in, Volume& out, const std::vector<double>& k, int axis) {
  const Dims3 d = in.dims();
  const auto r = static_cast<std::ptrdiff_t>(k.size() / 2);
  const std::size_t n = axis == 0 ? d.d : axis == 1 ? d.h : d.w;
  for (std::size_t z = 0; z < d.d; ++z) {
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t x = 0; x < d.w; ++x) {
        const std::size_t pos = axis == 0 ? z : axis == 1 ? y : x;
        double acc = 0.0;
        for (std::ptrdiff_t t = -r; t <= r; ++t) {
          const auto q = static_cast<std::size_t>(
              std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(pos) + t, 0, static_cast<std::ptrdiff_t>(n) - 1));
          const double v = axis == 0 ? in.at(q, y, x) : axis == 1 ? in.at(z, q, x) : in.at(z, y, q);
          acc += k[static_cast<std::size_t>(t + r)] * v;
        }
        out.at(z, y, x) = acc;
      }
    }
  }
}

}  // namespace

void PhantomConfig::validate() const {
  if (min_ellipsoids == 0 || max_ellipsoids < min_ellipsoids) {
    throw std::invalid_argument("PhantomConfig: invalid ellipsoid count range");
  }
  if (!(edge_softness > 0.0)) throw std::invalid_argument("PhantomConfig: edge_softness must be positive");
  if (!(texture_amplitude >= 0.0) || !(max_texture_frequency >= 0.0)) {
    throw std::invalid_argument("PhantomConfig: negative texture parameter");
  }
  if (!(blur_sigma_min >= 0.0) || blur_sigma_max < blur_sigma_min) {
    throw std::invalid_argument("PhantomConfig: invalid blur range");
  }
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("PhantomConfig: negative noise sigma");
}

Volume gaussian_blur(const Volume& v, double sigma) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_blur: negative sigma");
  if (sigma == 0.0) return v;
  const auto r = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double t = static_cast<double>(i) - static_cast<double>(r);
    k[i] = std::exp(-0.5 * t * t / (sigma * sigma));
  }
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& w : k) w /= sum;
  Volume a(v.dims());
  Volume b(v.dims());
  blur_axis(v, a, k, 0);
  blur_axis(a, b, k, 1);
  blur_axis(b, a, k, 2);
  return a;
}

PhantomPair generate_phantom_pair(std::uint64_t seed, const Dims3& dims, const PhantomConfig& cfg) {
  cfg.validate();
  if (dims.d < 16 || dims.h < 32 || dims.w < 32) {
    throw std::invalid_argument("generate_phantom_pair: dims must be at least 16x32x32");
  }
  Rng rng(derive_seed(seed, {0x7a}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  std::uniform_int_distribution<std::size_t> count_dist(cfg.min_ellipsoids, cfg.max_ellipsoids);
  const std::size_t count = count_dist(rng);
  // Distinct intensities: evenly spaced levels, shuffled, with a small jitter.
  std::vector<double> levels(count);
  for (std::size_t i = 0; i < count; ++i) {
    levels[i] = 0.25 + 0.6 * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(count - 1, 1));
  }
  std::shuffle(levels.begin(), levels.end(), rng);

  struct Ellipsoid {
    std::array<double, 3> c;
    std::array<double, 3> a;
    double intensity;
  };
  const std::array<double, 3> extent{static_cast<double>(dims.d), static_cast<double>(dims.h),
                                     static_cast<double>(dims.w)};
  std::vector<Ellipsoid> shapes;
  for (std::size_t i = 0; i < count; ++i) {
    Ellipsoid e{};
    for (int ax = 0; ax < 3; ++ax) {
      e.c[ax] = uniform(0.3, 0.7) * extent[ax];
      e.a[ax] = uniform(0.15, 0.35) * extent[ax];
    }
    e.intensity = levels[i] + uniform(-0.03, 0.03);
    shapes.push_back(e);
  }

  struct Wave {
    std::array<double, 3> k;
    double phase;
    double amp;
  };
  std::vector<Wave> waves;
  for (std::size_t i = 0; i < cfg.texture_waves; ++i) {
    Wave w{};
    for (int ax = 0; ax < 3; ++ax) w.k[ax] = 2.0 * std::numbers::pi * uniform(-1.0, 1.0) * cfg.max_texture_frequency;
    w.phase = uniform(0.0, 2.0 * std::numbers::pi);
    w.amp = cfg.texture_amplitude * uniform(0.5, 1.0) / std::sqrt(static_cast<double>(cfg.texture_waves));
    waves.push_back(w);
  }

  Volume target(dims);
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x) {
        const std::array<double, 3> p{z + 0.5, y + 0.5, x + 0.5};
        double v = 0.0;
        double inside = 0.0;
        for (const Ellipsoid& e : shapes) {
          double r2 = 0.0;
          for (int ax = 0; ax < 3; ++ax) {
            const double t = (p[ax] - e.c[ax]) / e.a[ax];
            r2 += t * t;
          }
          const double w = 1.0 / (1.0 + std::exp((std::sqrt(r2) - 1.0) / cfg.edge_softness));
          v += e.intensity * w;
          inside = std::max(inside, w);
        }
        double tex = 0.0;
        for (const Wave& w : waves) tex += w.amp * std::cos(w.k[0] * z + w.k[1] * y + w.k[2] * x + w.phase);
        target.at(z, y, x) = std::clamp(v + inside * tex, 0.0, 1.0);
      }
    }
  }

  const double sigma = uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
  Volume source = gaussian_blur(target, sigma);
  Rng noise_rng(derive_seed(seed, {0x7b}));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : source.data()) {
    const double n = noise(noise_rng);
    v = std::clamp(v + cfg.noise_sigma * n, 0.0, 1.0);
  }
  return {std::move(source), std::move(target), seed};
}

}  // namespace gdrift
