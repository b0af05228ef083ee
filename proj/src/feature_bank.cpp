#include "gdrift/feature_bank.hpp"

#include "gdrift/descriptor_autodiff.hpp"
#include "gdrift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gdrift {
namespace {

// Start of block i when n voxels are tiled into `blocks` blocks.
std::size_t block_start(std::size_t i, std::size_t n, std::size_t blocks) { return i * n / blocks; }

void check_stage(std::span<const EncoderStages> e, std::size_t stage) {
  for (const EncoderStages& s : e) {
    if (stage >= s.stages.size()) {
      throw std::invalid_argument("descriptor: stage " + std::to_string(stage) + " does not exist");
    }
  }
}

}  // namespace

Volume extract_patch(const Volume& v, const Origin& o, const Dims3& shape) {
  const Dims3 vd = v.dims();
  if (o[0] + shape.d > vd.d || o[1] + shape.h > vd.h || o[2] + shape.w > vd.w) {
    throw std::invalid_argument("extract_patch: patch exceeds volume bounds");
  }
  Volume p(shape);
  for (std::size_t z = 0; z < shape.d; ++z) {
    for (std::size_t y = 0; y < shape.h; ++y) {
      const double* src = &v.at(o[0] + z, o[1] + y, o[2]);
      std::copy(src, src + shape.w, &p.at(z, y, 0));
    }
  }
  return p;
}

void scatter_add_patch(Volume& dst, const Volume& patch, const Origin& o) {
  const Dims3 s = patch.dims();
  const Dims3 vd = dst.dims();
  if (o[0] + s.d > vd.d || o[1] + s.h > vd.h || o[2] + s.w > vd.w) {
    throw std::invalid_argument("scatter_add_patch: patch exceeds volume bounds");
  }
  for (std::size_t z = 0; z < s.d; ++z) {
    for (std::size_t y = 0; y < s.h; ++y) {
      double* out = &dst.at(o[0] + z, o[1] + y, o[2]);
      const double* in = &patch.at(z, y, 0);
      for (std::size_t x = 0; x < s.w; ++x) out[x] += in[x];
    }
  }
}

SubVolumeBatch sample_subvolumes(const Volume& v, std::size_t count, const Dims3& shape, std::uint64_t seed) {
  if (shape.count() == 0 || !shape.fits_inside(v.dims())) {
    throw std::invalid_argument("sample_subvolumes: patch shape does not fit inside the volume");
  }
  SubVolumeBatch b;
  b.seed = seed;
  Rng rng(derive_seed(seed, {0x5b}));
  std::uniform_int_distribution<std::size_t> pz(0, v.dims().d - shape.d);
  std::uniform_int_distribution<std::size_t> py(0, v.dims().h - shape.h);
  std::uniform_int_distribution<std::size_t> px(0, v.dims().w - shape.w);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t z = pz(rng);
    const std::size_t y = py(rng);
    const std::size_t x = px(rng);
    b.origins.push_back({z, y, x});
    b.patches.push_back(extract_patch(v, b.origins.back(), shape));
  }
  return b;
}

SubVolumeBatch sample_at(const Volume& v, const SubVolumeBatch& like) {
  SubVolumeBatch b;
  b.seed = like.seed;
  b.origins = like.origins;
  const Dims3 shape = like.patch_dims();
  for (const Origin& o : like.origins) b.patches.push_back(extract_patch(v, o, shape));
  return b;
}

SubVolumeBatch cyclic_shift(const SubVolumeBatch& b) {
  SubVolumeBatch out;
  out.seed = b.seed;
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < n; ++i) {
    out.patches.push_back(b.patches[(i + 1) % n]);
    out.origins.push_back(b.origins[(i + 1) % n]);
  }
  return out;
}

Tensor3 energy_descriptors(std::span<const Volume> patches, std::size_t blocks) {
  if (blocks == 0) throw std::invalid_argument("energy_descriptors: zero blocks");
  Tensor3 out(patches.size(), blocks * blocks * blocks, 1);
  for (std::size_t n = 0; n < patches.size(); ++n) {
    const Volume& p = patches[n];
    const Dims3 d = p.dims();
    if (d.d < blocks || d.h < blocks || d.w < blocks) {
      throw std::invalid_argument("energy_descriptors: patch smaller than the block grid");
    }
    std::size_t m = 0;
    for (std::size_t bz = 0; bz < blocks; ++bz) {
      for (std::size_t by = 0; by < blocks; ++by) {
        for (std::size_t bx = 0; bx < blocks; ++bx, ++m) {
          double sum = 0.0;
          std::size_t count = 0;
          for (std::size_t z = block_start(bz, d.d, blocks); z < block_start(bz + 1, d.d, blocks); ++z) {
            for (std::size_t y = block_start(by, d.h, blocks); y < block_start(by + 1, d.h, blocks); ++y) {
              for (std::size_t x = block_start(bx, d.w, blocks); x < block_start(bx + 1, d.w, blocks); ++x) {
                const double v = p.at(z, y, x);
                sum += v * v;
                ++count;
              }
            }
          }
          out(n, m, 0) = std::sqrt(sum / static_cast<double>(count));
        }
      }
    }
  }
  return out;
}

Tensor3 energy_descriptors(const SubVolumeBatch& b, std::size_t blocks) { return energy_descriptors(b.patches, blocks); }

Tensor3 global_descriptors(std::span<const EncoderStages> e, std::span<const std::size_t> stages) {
  if (e.empty()) return {};
  if (stages.empty()) throw std::invalid_argument("global_descriptors: no stages selected");
  std::size_t channels = 0;
  for (std::size_t s : stages) {
    check_stage(e, s);
    channels += e[0].stages[s].channels();
  }
  Tensor3 out(e.size(), 1, 2 * channels);
  for (std::size_t n = 0; n < e.size(); ++n) {
    std::size_t k = 0;
    for (std::size_t s : stages) {
      const FeatureMap& f = e[n].stages[s];
      const double count = static_cast<double>(f.dims().count());
      for (std::size_t c = 0; c < f.channels(); ++c) {
        const auto ch = f.channel(c);
        double mean = 0.0;
        for (double v : ch) mean += v;
        mean /= count;
        double var = 0.0;
        for (double v : ch) var += (v - mean) * (v - mean);
        var /= count;
        out(n, 0, k++) = mean;
        out(n, 0, k++) = std::sqrt(var);
      }
    }
  }
  return out;
}

Tensor3 global_descriptors(std::span<const EncoderStages> e) {
  if (e.empty()) return {};
  std::vector<std::size_t> all(e[0].stages.size());
  for (std::size_t s = 0; s < all.size(); ++s) all[s] = s;
  return global_descriptors(e, all);
}

Tensor3 local_descriptors(std::span<const EncoderStages> e) {
  if (e.empty()) return {};
  if (e[0].stages.empty()) throw std::invalid_argument("local_descriptors: no encoder stages");
  const FeatureMap& first = e[0].stages.back();
  const std::size_t sites = first.dims().count();
  Tensor3 out(e.size(), sites, first.channels());
  for (std::size_t n = 0; n < e.size(); ++n) {
    const FeatureMap& f = e[n].stages.back();
    if (!f.same_shape(first)) throw std::invalid_argument("local_descriptors: inconsistent stage shapes");
    for (std::size_t c = 0; c < f.channels(); ++c) {
      const auto ch = f.channel(c);
      for (std::size_t m = 0; m < sites; ++m) out(n, m, c) = ch[m];
    }
  }
  return out;
}

Tensor3 spatial_descriptors(std::span<const EncoderStages> e, std::size_t window, std::size_t stage) {
  if (e.empty()) return {};
  if (window == 0) throw std::invalid_argument("spatial_descriptors: zero window");
  check_stage(e, stage);
  const FeatureMap& first = e[0].stages[stage];
  const Dims3 d = first.dims();
  if (d.d % window != 0 || d.h % window != 0 || d.w % window != 0) {
    throw std::invalid_argument("spatial_descriptors: stage dims not divisible by window " + std::to_string(window));
  }
  const Dims3 g{d.d / window, d.h / window, d.w / window};
  const double inv = 1.0 / static_cast<double>(window * window * window);
  Tensor3 out(e.size(), g.count(), first.channels());
  for (std::size_t n = 0; n < e.size(); ++n) {
    const FeatureMap& f = e[n].stages[stage];
    for (std::size_t c = 0; c < f.channels(); ++c) {
      std::size_t m = 0;
      for (std::size_t gz = 0; gz < g.d; ++gz) {
        for (std::size_t gy = 0; gy < g.h; ++gy) {
          for (std::size_t gx = 0; gx < g.w; ++gx, ++m) {
            double sum = 0.0;
            for (std::size_t z = gz * window; z < (gz + 1) * window; ++z) {
              for (std::size_t y = gy * window; y < (gy + 1) * window; ++y) {
                for (std::size_t x = gx * window; x < (gx + 1) * window; ++x) sum += f.at(c, z, y, x);
              }
            }
            out(n, m, c) = sum * inv;
          }
        }
      }
    }
  }
  return out;
}

bool FeatureBankConfig::enabled(Family f) const {
  return std::find(families.begin(), families.end(), f) != families.end();
}

void FeatureBankConfig::validate() const {
  encoder.validate();
  if (families.empty()) throw std::invalid_argument("FeatureBankConfig: no families enabled");
  if (energy_blocks == 0) throw std::invalid_argument("FeatureBankConfig: zero energy blocks");
  for (std::size_t s : global_stages) {
    if (s >= encoder.channels.size()) throw std::invalid_argument("FeatureBankConfig: global stage out of range");
  }
  if (global_stages.empty() && enabled(Family::Global)) {
    throw std::invalid_argument("FeatureBankConfig: global family needs at least one stage");
  }
  if (spatial_stage >= encoder.channels.size()) {
    throw std::invalid_argument("FeatureBankConfig: spatial stage out of range");
  }
}

const Tensor3& Extraction::features(Family f) const {
  for (const FamilyFeatures& ff : families) {
    if (ff.family == f) return ff.features;
  }
  throw std::invalid_argument("Extraction: family " + std::string(family_name(f)) + " not extracted");
}

FeatureBank::FeatureBank(FeatureBankConfig cfg) : cfg_(std::move(cfg)), encoder_(cfg_.encoder) { cfg_.validate(); }

FeatureBank::FeatureBank(FeatureBankConfig cfg, SurrogateEncoder encoder)
    : cfg_(std::move(cfg)), encoder_(std::move(encoder)) {
  cfg_.validate();
}

Extraction FeatureBank::extract(std::span<const Volume> patches) const {
  Extraction ex;
  bool needs_encoder = false;
  for (Family f : cfg_.families) needs_encoder |= f != Family::Energy;
  if (needs_encoder) ex.stages = encoder_.encode(patches);
  for (Family f : kAllFamilies) {
    if (!cfg_.enabled(f)) continue;
    switch (f) {
      case Family::Energy: ex.families.push_back({f, energy_descriptors(patches, cfg_.energy_blocks)}); break;
      case Family::Global: ex.families.push_back({f, global_descriptors(ex.stages, cfg_.global_stages)}); break;
      case Family::Local: ex.families.push_back({f, local_descriptors(ex.stages)}); break;
      case Family::Spatial2: ex.families.push_back({f, spatial_descriptors(ex.stages, 2, cfg_.spatial_stage)}); break;
      case Family::Spatial4: ex.families.push_back({f, spatial_descriptors(ex.stages, 4, cfg_.spatial_stage)}); break;
    }
  }
  return ex;
}

std::vector<FeatureTriplet> FeatureBank::build(const SubVolumeBatch& gen, const SubVolumeBatch& pos,
                                               const SubVolumeBatch& neg) const {
  if (gen.size() == 0) throw std::invalid_argument("build_feature_bank: empty batch");
  if (gen.size() != pos.size() || gen.size() != neg.size()) {
    throw std::invalid_argument("build_feature_bank: batch sizes differ");
  }
  const Dims3 shape = gen.patch_dims();
  for (const SubVolumeBatch* b : {&gen, &pos, &neg}) {
    for (const Volume& p : b->patches) {
      if (p.dims() != shape) throw std::invalid_argument("build_feature_bank: patch shape mismatch across batches");
    }
  }
  const Extraction eg = extract(gen.patches);
  const Extraction ep = extract(pos.patches);
  const Extraction en = extract(neg.patches);
  std::vector<FeatureTriplet> out;
  for (std::size_t i = 0; i < eg.families.size(); ++i) {
    FeatureTriplet t;
    t.family = eg.families[i].family;
    t.h = eg.families[i].features;
    t.u_pos = ep.families[i].features;
    t.u_neg = en.families[i].features;
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Volume> FeatureBank::vjp(std::span<const Volume> patches,
                                     std::span<const FamilyFeatures> cotangents) const {
  return vjp(extract(patches), patches, cotangents);
}

std::vector<Volume> FeatureBank::vjp(const Extraction& fwd, std::span<const Volume> patches,
                                     std::span<const FamilyFeatures> cotangents) const {
  std::vector<Volume> out;
  out.reserve(patches.size());
  for (const Volume& p : patches) out.emplace_back(p.dims());

  StageCotangents stage_cot;
  bool any_stage = false;
  for (const FamilyFeatures& cot : cotangents) {
    if (!cfg_.enabled(cot.family)) {
      throw std::invalid_argument("FeatureBank::vjp: family " + std::string(family_name(cot.family)) +
                                  " is not enabled");
    }
    if (!cot.features.same_shape(fwd.features(cot.family))) {
      throw std::invalid_argument("FeatureBank::vjp: cotangent shape mismatch for family " +
                                  std::string(family_name(cot.family)));
    }
    if (cot.family == Family::Energy) {
      const std::vector<Volume> g = vjp_energy(patches, cot.features, cfg_.energy_blocks);
      for (std::size_t n = 0; n < out.size(); ++n) {
        auto dst = out[n].data();
        auto src = g[n].data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      continue;
    }
    if (!any_stage) {
      stage_cot = zero_stage_cotangents(fwd.stages);
      any_stage = true;
    }
    switch (cot.family) {
      case Family::Global: vjp_global_stats(fwd.stages, cot.features, cfg_.global_stages, stage_cot); break;
      case Family::Local: vjp_local(fwd.stages, cot.features, stage_cot); break;
      case Family::Spatial2: vjp_window_pooling(fwd.stages, cot.features, 2, cfg_.spatial_stage, stage_cot); break;
      case Family::Spatial4: vjp_window_pooling(fwd.stages, cot.features, 4, cfg_.spatial_stage, stage_cot); break;
      case Family::Energy: break;
    }
  }
  if (any_stage) {
    const std::vector<Volume> g = vjp_encoder(encoder_, fwd.stages, stage_cot);
    for (std::size_t n = 0; n < out.size(); ++n) {
      auto dst = out[n].data();
      auto src = g[n].data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  return out;
}

std::vector<FeatureTriplet> build_feature_bank(const SubVolumeBatch& gen, const SubVolumeBatch& pos,
                                               const SubVolumeBatch& neg, const FeatureBankConfig& cfg) {
  return FeatureBank(cfg).build(gen, pos, neg);
}

}  // namespace gdrift
