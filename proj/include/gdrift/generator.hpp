#pragma once

#include "gdrift/tensor.hpp"
#include "gdrift/volume.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gdrift {

// Residual per-voxel network: the (2r+1)^3 neighborhood of each voxel
// (replicate padding) feeds a small leaky-rectified MLP whose scalar output
// is added to the centre voxel.
struct GeneratorConfig {
  std::size_t radius = 1;
  std::vector<std::size_t> hidden{16, 16};
  double negative_slope = 0.1;

  void validate() const;
  std::size_t inputs() const { return (2 * radius + 1) * (2 * radius + 1) * (2 * radius + 1); }
  std::size_t parameter_count() const;
};

struct AdamState {
  Vector m;
  Vector v;
  std::uint64_t t = 0;
};

// Parameters are laid out layer by layer as [W (out x in, row-major), b].
struct GeneratorState {
  GeneratorConfig arch;
  Vector params;
  AdamState opt;

  void validate() const;
};

// Hidden weights N(0, 1/fan_in); the output layer and all biases start at
// zero, so a fresh generator is the identity map.
GeneratorState init_generator(const GeneratorConfig& arch, std::uint64_t seed);

Volume generator_forward(const GeneratorConfig& arch, const Vector& params, const Volume& src);
std::vector<Volume> generator_forward(const GeneratorState& g, std::span<const Volume> src);

// Parameter cotangent of sum_b <out_cotangent_b, G(src_b)>.
Vector generator_vjp(const GeneratorConfig& arch, const Vector& params, std::span<const Volume> src,
                     std::span<const Volume> out_cotangent);
Vector generator_vjp(const GeneratorState& g, std::span<const Volume> src, std::span<const Volume> out_cotangent);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t warmup_steps = 10;
  double min_lr_ratio = 0.0;

  void validate() const;
};

// Linear warm-up to lr, then cosine decay to min_lr_ratio * lr at total_steps.
// `step` is 1-based.
double scheduled_lr(const AdamConfig& cfg, std::uint64_t step, std::uint64_t total_steps);

// One adaptive-moment update with bias correction; increments opt.t.
void adam_update(GeneratorState& g, const Vector& grad, const AdamConfig& cfg, double lr);

}  // namespace gdrift
