#pragma once

#include "gdrift/volume.hpp"

#include <cstdint>

namespace gdrift {

struct PhantomConfig {
  std::size_t min_ellipsoids = 3;
  std::size_t max_ellipsoids = 6;
  double edge_softness = 0.08;    // logistic width, in normalized radius units
  double texture_amplitude = 0.04;
  std::size_t texture_waves = 6;
  double max_texture_frequency = 0.15;  // cycles per voxel
  double blur_sigma_min = 1.0;
  double blur_sigma_max = 2.0;
  double noise_sigma = 0.02;

  void validate() const;
};

struct PhantomPair {
  Volume source;
  Volume target;
  std::uint64_t seed = 0;
};

// Clean target: soft ellipsoids with distinct intensities plus a low-pass
// cosine texture, clipped to [0, 1]. Source: the target blurred with a
// seeded isotropic Gaussian and corrupted by additive noise, clipped to [0, 1].
PhantomPair generate_phantom_pair(std::uint64_t seed, const Dims3& dims, const PhantomConfig& cfg = {});

// Separable Gaussian blur with replicate boundaries; sigma = 0 is the identity.
Volume gaussian_blur(const Volume& v, double sigma);

}  // namespace gdrift
