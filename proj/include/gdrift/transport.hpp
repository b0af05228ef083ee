#pragma once

#include "gdrift/affinity.hpp"

#include <cstdint>
#include <vector>

namespace gdrift {

struct ParticleCloud {
  Matrix particles;       // N x D
  Matrix target_samples;  // P x D
  std::uint64_t step = 0;
  double eta = 0.5;
  // Seeds the positive subsample drawn at each step.
  std::uint64_t seed = 0;

  void validate() const;
};

struct TransportReport {
  std::vector<double> energy_distance;
  std::vector<double> mean_drift_norm;
  Matrix final_particles;
};

struct DriftStepResult {
  ParticleCloud cloud;
  // Per-particle displacement applied this step, in particle coordinates,
  // before multiplication by eta.
  Matrix displacement;
};

// One drift update: raw coordinates form a single family (M = 1, C = D);
// positives are a fresh N-subsample of the targets, negatives are the
// particles themselves with self-matches masked.
DriftStepResult drift_step_detailed(const ParticleCloud& c, const DriftConfig& cfg);
ParticleCloud drift_step(const ParticleCloud& c, const DriftConfig& cfg);

TransportReport run_transport(const ParticleCloud& init, int steps, const DriftConfig& cfg);

// 2 E||X - Y|| - E||X - X'|| - E||Y - Y'|| over all ordered pairs.
double energy_distance(const Matrix& x, const Matrix& y);

double mean_row_norm(const Matrix& m);

// Field settings used by the simulator: temperatures {0.04, 0.1, 0.4}, the
// mask kept out of the scale, per-temperature fields summed unnormalized.
DriftConfig transport_drift_defaults();

// 2-D experiment: particles from N(0, init_sigma^2 I), targets from an equal
// mixture of N((+-mixture_offset, 0), mixture_sigma^2 I).
struct TransportSettings {
  DriftConfig drift = transport_drift_defaults();
  std::size_t particles = 256;
  std::size_t targets = 512;
  int steps = 200;
  double eta = 0.5;
  double init_sigma = 1.0;
  double mixture_offset = 3.0;
  double mixture_sigma = 0.5;

  void validate() const;
};

ParticleCloud mixture_cloud(const TransportSettings& s, std::uint64_t seed);

}  // namespace gdrift
