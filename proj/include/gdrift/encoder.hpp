#pragma once

#include "gdrift/volume.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gdrift {

// Fixed-kernel multi-stage feature extractor standing in for a pretrained
// 3D encoder: each stage is a zero-padded strided 3D cross-correlation with
// frozen random kernels followed by a leaky rectifier. No biases, no
// trainable state.
struct EncoderConfig {
  std::vector<std::size_t> channels{8, 16, 32};
  std::size_t kernel = 3;
  std::size_t stride = 2;
  double negative_slope = 0.1;
  std::uint64_t seed = 20240917;

  void validate() const;
};

struct EncoderStages {
  std::vector<FeatureMap> stages;          // rectified outputs
  std::vector<FeatureMap> pre_activation;  // conv outputs, kept for the adjoint
  Dims3 input_dims;
  std::uint64_t seed = 0;
};

class SurrogateEncoder {
 public:
  // Kernels drawn from N(0, 1) scaled by 1 / sqrt(fan_in), seeded per stage.
  explicit SurrogateEncoder(EncoderConfig cfg);
  // Explicit kernels, stage s laid out [c_out][c_in][k][k][k].
  SurrogateEncoder(EncoderConfig cfg, std::vector<std::vector<double>> kernels);

  const EncoderConfig& config() const { return cfg_; }
  std::size_t num_stages() const { return cfg_.channels.size(); }
  std::size_t in_channels(std::size_t stage) const { return stage == 0 ? 1 : cfg_.channels[stage - 1]; }
  std::span<const double> kernel(std::size_t stage) const { return kernels_[stage]; }

  // Throws if the input is not divisible by the cumulative stride.
  void check_input(const Dims3& input) const;
  Dims3 stage_dims(std::size_t stage, const Dims3& input) const;

  EncoderStages encode(const Volume& x) const;
  std::vector<EncoderStages> encode(std::span<const Volume> batch) const;

  // Adjoint with respect to the input voxels. stage_cotangents[s] is the
  // cotangent of stage s's rectified output; an empty map means zero.
  Volume vjp(const EncoderStages& forward, std::span<const FeatureMap> stage_cotangents) const;
  Volume vjp(const Volume& x, std::span<const FeatureMap> stage_cotangents) const;

 private:
  FeatureMap conv(std::size_t stage, const FeatureMap& in) const;
  FeatureMap conv_transpose(std::size_t stage, const FeatureMap& g_out, const Dims3& in_dims) const;

  EncoderConfig cfg_;
  std::vector<std::vector<double>> kernels_;
};

}  // namespace gdrift
