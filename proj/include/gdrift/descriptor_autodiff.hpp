#pragma once

#include "gdrift/drift_field.hpp"
#include "gdrift/feature_bank.hpp"

#include <span>
#include <vector>

namespace gdrift {

// Hand-written vector-Jacobian products for the descriptor pipeline.
//
// Nondifferentiable points take fixed subgradients: a zero-RMS block and a
// zero-std channel give zero cotangent, and the rectifier kink takes the
// slope side.

// Adjoint of energy_descriptors; dRMS/dx_i = x_i / (K * RMS).
std::vector<Volume> vjp_energy(std::span<const Volume> patches, const Tensor3& g, std::size_t blocks = 4);

// Stage-space cotangents, one FeatureMap per stage and patch, zero-filled
// with the forward shapes.
using StageCotangents = std::vector<std::vector<FeatureMap>>;
StageCotangents zero_stage_cotangents(std::span<const EncoderStages> e);

// Adjoints of the mean / std statistics, deepest-site flattening and window
// pooling. Each accumulates into `out`.
void vjp_global_stats(std::span<const EncoderStages> e, const Tensor3& g, std::span<const std::size_t> stages,
                      StageCotangents& out);
void vjp_local(std::span<const EncoderStages> e, const Tensor3& g, StageCotangents& out);
void vjp_window_pooling(std::span<const EncoderStages> e, const Tensor3& g, std::size_t window,
                        std::size_t stage, StageCotangents& out);

// Pulls stage cotangents back to voxel space through the encoder.
std::vector<Volume> vjp_encoder(const SurrogateEncoder& enc, std::span<const EncoderStages> e,
                                const StageCotangents& stage_cotangents);

// Voxel-space gradient of sum_d 0.5 * ||H_d / S_d - sg(H_d / S_d + V_d)||^2
// with V_d and S_d detached: the pullback of -V_d / S_d through each
// family's descriptor map, summed over families.
std::vector<Volume> pullback_drift_gradient(const FeatureBank& bank, std::span<const Volume> patches,
                                            std::span<const DriftField> fields);
std::vector<Volume> pullback_drift_gradient(const FeatureBank& bank, const Extraction& forward,
                                            std::span<const Volume> patches, std::span<const DriftField> fields);

}  // namespace gdrift
