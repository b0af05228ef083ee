#pragma once

#include "gdrift/affinity.hpp"
#include "gdrift/drift_field.hpp"
#include "gdrift/feature_bank.hpp"
#include "gdrift/generator.hpp"
#include "gdrift/mgda.hpp"
#include "gdrift/phantom.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace gdrift {

struct TrainConfig {
  DriftConfig drift;
  FeatureBankConfig bank;
  GeneratorConfig generator;
  PhantomConfig phantom;
  AdamConfig optimizer;
  QpOptions mgda;

  Dims3 volume{32, 32, 32};
  std::size_t batch_size = 4;
  std::size_t subvolumes = 12;  // per batch item
  Dims3 subvolume{16, 32, 32};
  std::size_t train_pairs = 16;
  std::size_t eval_pairs = 4;
  std::size_t epochs = 50;  // one epoch is train_pairs / batch_size steps
  std::size_t spectrum_bands = 8;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t steps_per_epoch() const { return train_pairs / batch_size; }
  std::size_t total_steps() const { return epochs * steps_per_epoch(); }
};

struct StepMetrics {
  std::uint64_t step = 0;  // 1-based
  double l_fid = 0.0;
  double l_drift = 0.0;
  double alpha_fid = 1.0;
  double alpha_drift = 0.0;
  double grad_norm_fid = 0.0;    // output-space ||grad L_fid||
  double grad_norm_drift = 0.0;  // output-space ||lambda * grad L_drift||
  friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

// Mean absolute error over every voxel of the batch, with sign(0) = 0 in
// the gradient.
struct FidelityResult {
  double loss = 0.0;
  std::vector<Volume> grad;
};
FidelityResult fidelity_loss(std::span<const Volume> y, std::span<const Volume> y_gt);

// Drift regression targets frozen at one parameter point, for evaluating
// L_total = alpha_fid * L_fid + alpha_drift * lambda * L_drift at nearby
// parameters with the fields, scales and weights held fixed.
struct FrozenFamily {
  Family family;
  double scale;
  Tensor3 target;  // H / S + V at the freeze point
};
struct FrozenObjective {
  std::vector<std::size_t> item;  // batch item of each sub-volume
  std::vector<Origin> origins;
  Dims3 shape;
  std::vector<FrozenFamily> families;
  double alpha_fid = 1.0;
  double alpha_drift = 0.0;
  double lambda = 0.0;
};

struct StepGradient {
  StepMetrics metrics;
  Vector param_grad;
  FrozenObjective frozen;
};

// Steps (1)-(6) of a training step: forward, paired sub-volume sampling,
// drift fields, output-space gradients, coordination, generator pullback.
// With lambda = 0 the drift branch is skipped and the step is fidelity-only.
StepGradient compute_step_gradient(const GeneratorState& g, std::span<const PhantomPair> batch,
                                   const TrainConfig& cfg, std::uint64_t step);

// compute_step_gradient followed by the scheduled adaptive-moment update.
StepMetrics train_step(GeneratorState& g, std::span<const PhantomPair> batch, const TrainConfig& cfg,
                       std::uint64_t step);

double frozen_total_loss(const FrozenObjective& f, const FeatureBank& bank, const GeneratorConfig& arch,
                         const Vector& params, std::span<const PhantomPair> batch);
Vector frozen_total_gradient(const FrozenObjective& f, const FeatureBank& bank, const GeneratorConfig& arch,
                             const Vector& params, std::span<const PhantomPair> batch);

std::vector<PhantomPair> training_set(const TrainConfig& cfg);
std::vector<PhantomPair> evaluation_set(const TrainConfig& cfg);

// Training-set indices used at `step` (1-based); a fresh seeded permutation
// each epoch.
std::vector<std::size_t> batch_indices(const TrainConfig& cfg, std::uint64_t step);

struct TrainState {
  GeneratorState generator;
  std::uint64_t step = 0;  // completed steps
  std::vector<StepMetrics> history;
};

TrainState init_train_state(const TrainConfig& cfg);

// Runs steps state.step + 1 .. until; `on_step` is invoked after each one.
void run_training(TrainState& state, const TrainConfig& cfg, std::span<const PhantomPair> data, std::uint64_t until,
                  const std::function<void(const TrainState&)>& on_step = {});

struct FamilyDistance {
  Family family;
  double energy_distance;
  double normalized;  // divided by the mean target-target descriptor distance
};

struct EvalReport {
  double mae = 0.0;           // clipped predictions vs targets
  double mae_identity = 0.0;  // sources vs targets
  std::vector<double> residual_bands;  // mean radial band energies of prediction residuals
  std::vector<FamilyDistance> feature_distances;
  double feature_energy_distance = 0.0;  // sum of normalized family distances
};

// Held-out evaluation: predictions are clipped to [0, 1]; descriptor
// distributions are compared on seeded paired sub-volumes.
EvalReport evaluate(const GeneratorState& g, const TrainConfig& cfg, std::span<const PhantomPair> pairs);

}  // namespace gdrift
