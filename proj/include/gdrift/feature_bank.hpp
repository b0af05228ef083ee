#pragma once

#include "gdrift/affinity.hpp"
#include "gdrift/encoder.hpp"
#include "gdrift/family.hpp"
#include "gdrift/volume.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace gdrift {

using Origin = std::array<std::size_t, 3>;

struct SubVolumeBatch {
  std::vector<Volume> patches;
  std::vector<Origin> origins;
  std::uint64_t seed = 0;

  std::size_t size() const { return patches.size(); }
  Dims3 patch_dims() const { return patches.empty() ? Dims3{} : patches.front().dims(); }
};

Volume extract_patch(const Volume& v, const Origin& origin, const Dims3& shape);

// Adds `patch` into `dst` at `origin`; the adjoint of extract_patch.
void scatter_add_patch(Volume& dst, const Volume& patch, const Origin& origin);

// `count` patches with uniformly drawn corners. Origins depend only on
// (seed, count, shape, volume dims), so paired volumes sampled with the same
// arguments share locations.
SubVolumeBatch sample_subvolumes(const Volume& v, std::size_t count, const Dims3& shape, std::uint64_t seed);

// Same sampling applied to a second volume at the origins of `like`.
SubVolumeBatch sample_at(const Volume& v, const SubVolumeBatch& like);

// Cyclic batch shift i -> (i + 1) mod N, used to form negatives.
SubVolumeBatch cyclic_shift(const SubVolumeBatch& b);

// Per-patch root-mean-square intensity over a blocks^3 tiling. C = 1.
Tensor3 energy_descriptors(std::span<const Volume> patches, std::size_t blocks = 4);
Tensor3 energy_descriptors(const SubVolumeBatch& b, std::size_t blocks = 4);

// Per selected stage and channel: (spatial mean, population std). M = 1.
Tensor3 global_descriptors(std::span<const EncoderStages> e, std::span<const std::size_t> stages);
Tensor3 global_descriptors(std::span<const EncoderStages> e);

// Every deepest-stage site is one location carrying its channel vector.
Tensor3 local_descriptors(std::span<const EncoderStages> e);

// Non-overlapping window mean pooling of one stage; one location per window.
Tensor3 spatial_descriptors(std::span<const EncoderStages> e, std::size_t window, std::size_t stage);

struct FeatureBankConfig {
  EncoderConfig encoder;
  std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
  std::size_t energy_blocks = 4;
  std::vector<std::size_t> global_stages{0, 1, 2};
  std::size_t spatial_stage = 1;

  bool enabled(Family f) const;
  void validate() const;
};

struct FamilyFeatures {
  Family family;
  Tensor3 features;
};

struct Extraction {
  std::vector<EncoderStages> stages;
  std::vector<FamilyFeatures> families;

  const Tensor3& features(Family f) const;
};

// Forward descriptor pipeline plus its adjoint.
class FeatureBank {
 public:
  explicit FeatureBank(FeatureBankConfig cfg);
  FeatureBank(FeatureBankConfig cfg, SurrogateEncoder encoder);

  const FeatureBankConfig& config() const { return cfg_; }
  const SurrogateEncoder& encoder() const { return encoder_; }

  Extraction extract(std::span<const Volume> patches) const;

  // One triplet per enabled family.
  std::vector<FeatureTriplet> build(const SubVolumeBatch& gen, const SubVolumeBatch& pos,
                                    const SubVolumeBatch& neg) const;

  // Voxel-space cotangent of sum_f <cotangent_f, features_f(patches)>.
  std::vector<Volume> vjp(std::span<const Volume> patches, std::span<const FamilyFeatures> cotangents) const;
  std::vector<Volume> vjp(const Extraction& forward, std::span<const Volume> patches,
                          std::span<const FamilyFeatures> cotangents) const;

 private:
  FeatureBankConfig cfg_;
  SurrogateEncoder encoder_;
};

std::vector<FeatureTriplet> build_feature_bank(const SubVolumeBatch& gen, const SubVolumeBatch& pos,
                                               const SubVolumeBatch& neg, const FeatureBankConfig& cfg);

}  // namespace gdrift
