#include "gdrift/descriptor_autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gdrift {
namespace {

std::size_t block_start(std::size_t i, std::size_t n, std::size_t blocks) { return i * n / blocks; }

void check_batch(std::span<const EncoderStages> e, const Tensor3& g, const StageCotangents& out, const char* who) {
  if (g.n() != e.size() || out.size() != e.size()) {
    throw std::invalid_argument(std::string(who) + ": batch size mismatch");
  }
}

}  // namespace

std::vector<Volume> vjp_energy(std::span<const Volume> patches, const Tensor3& g, std::size_t blocks) {
  if (blocks == 0) throw std::invalid_argument("vjp_energy: zero blocks");
  if (g.n() != patches.size() || g.m() != blocks * blocks * blocks || g.c() != 1) {
    throw std::invalid_argument("vjp_energy: cotangent shape mismatch");
  }
  const Tensor3 rms = energy_descriptors(patches, blocks);
  std::vector<Volume> out;
  out.reserve(patches.size());
  for (std::size_t n = 0; n < patches.size(); ++n) {
    const Volume& p = patches[n];
    const Dims3 d = p.dims();
    Volume gx(d);
    std::size_t m = 0;
    for (std::size_t bz = 0; bz < blocks; ++bz) {
      for (std::size_t by = 0; by < blocks; ++by) {
        for (std::size_t bx = 0; bx < blocks; ++bx, ++m) {
          const double r = rms(n, m, 0);
          if (!(r > 0.0)) continue;
          const std::size_t k = (block_start(bz + 1, d.d, blocks) - block_start(bz, d.d, blocks)) *
                                (block_start(by + 1, d.h, blocks) - block_start(by, d.h, blocks)) *
                                (block_start(bx + 1, d.w, blocks) - block_start(bx, d.w, blocks));
          const double coef = g(n, m, 0) / (static_cast<double>(k) * r);
          for (std::size_t z = block_start(bz, d.d, blocks); z < block_start(bz + 1, d.d, blocks); ++z) {
            for (std::size_t y = block_start(by, d.h, blocks); y < block_start(by + 1, d.h, blocks); ++y) {
              for (std::size_t x = block_start(bx, d.w, blocks); x < block_start(bx + 1, d.w, blocks); ++x) {
                gx.at(z, y, x) = coef * p.at(z, y, x);
              }
            }
          }
        }
      }
    }
    out.push_back(std::move(gx));
  }
  return out;
}

StageCotangents zero_stage_cotangents(std::span<const EncoderStages> e) {
  StageCotangents out(e.size());
  for (std::size_t n = 0; n < e.size(); ++n) {
    for (const FeatureMap& f : e[n].stages) out[n].emplace_back(f.channels(), f.dims());
  }
  return out;
}

void vjp_global_stats(std::span<const EncoderStages> e, const Tensor3& g, std::span<const std::size_t> stages,
                      StageCotangents& out) {
  check_batch(e, g, out, "vjp_global_stats");
  std::size_t channels = 0;
  for (std::size_t s : stages) {
    if (e.empty()) break;
    if (s >= e[0].stages.size()) throw std::invalid_argument("vjp_global_stats: stage out of range");
    channels += e[0].stages[s].channels();
  }
  if (g.m() != 1 || g.c() != 2 * channels) throw std::invalid_argument("vjp_global_stats: cotangent shape mismatch");
  for (std::size_t n = 0; n < e.size(); ++n) {
    std::size_t k = 0;
    for (std::size_t s : stages) {
      const FeatureMap& f = e[n].stages[s];
      FeatureMap& dst = out[n][s];
      const double count = static_cast<double>(f.dims().count());
      for (std::size_t c = 0; c < f.channels(); ++c) {
        const auto x = f.channel(c);
        auto gx = dst.channel(c);
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= count;
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / count);
        const double g_mean = g(n, 0, k++) / count;
        const double g_std = g(n, 0, k++);
        const double coef = sd > 0.0 ? g_std / (count * sd) : 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g_mean + coef * (x[i] - mean);
      }
    }
  }
}

void vjp_local(std::span<const EncoderStages> e, const Tensor3& g, StageCotangents& out) {
  check_batch(e, g, out, "vjp_local");
  for (std::size_t n = 0; n < e.size(); ++n) {
    FeatureMap& dst = out[n].back();
    const std::size_t sites = dst.dims().count();
    if (g.m() != sites || g.c() != dst.channels()) throw std::invalid_argument("vjp_local: cotangent shape mismatch");
    for (std::size_t c = 0; c < dst.channels(); ++c) {
      auto gx = dst.channel(c);
      for (std::size_t m = 0; m < sites; ++m) gx[m] += g(n, m, c);
    }
  }
}

void vjp_window_pooling(std::span<const EncoderStages> e, const Tensor3& g, std::size_t window, std::size_t stage,
                        StageCotangents& out) {
  check_batch(e, g, out, "vjp_window_pooling");
  if (window == 0) throw std::invalid_argument("vjp_window_pooling: zero window");
  const double inv = 1.0 / static_cast<double>(window * window * window);
  for (std::size_t n = 0; n < e.size(); ++n) {
    if (stage >= out[n].size()) throw std::invalid_argument("vjp_window_pooling: stage out of range");
    FeatureMap& dst = out[n][stage];
    const Dims3 d = dst.dims();
    if (d.d % window != 0 || d.h % window != 0 || d.w % window != 0) {
      throw std::invalid_argument("vjp_window_pooling: stage dims not divisible by window");
    }
    const Dims3 gd{d.d / window, d.h / window, d.w / window};
    if (g.m() != gd.count() || g.c() != dst.channels()) {
      throw std::invalid_argument("vjp_window_pooling: cotangent shape mismatch");
    }
    for (std::size_t c = 0; c < dst.channels(); ++c) {
      for (std::size_t z = 0; z < d.d; ++z) {
        for (std::size_t y = 0; y < d.h; ++y) {
          for (std::size_t x = 0; x < d.w; ++x) {
            const std::size_t m = ((z / window) * gd.h + y / window) * gd.w + x / window;
            dst.at(c, z, y, x) += g(n, m, c) * inv;
          }
        }
      }
    }
  }
}

std::vector<Volume> vjp_encoder(const SurrogateEncoder& enc, std::span<const EncoderStages> e,
                                const StageCotangents& stage_cotangents) {
  if (stage_cotangents.size() != e.size()) throw std::invalid_argument("vjp_encoder: batch size mismatch");
  std::vector<Volume> out;
  out.reserve(e.size());
  for (std::size_t n = 0; n < e.size(); ++n) out.push_back(enc.vjp(e[n], stage_cotangents[n]));
  return out;
}

std::vector<Volume> pullback_drift_gradient(const FeatureBank& bank, std::span<const Volume> patches,
                                            std::span<const DriftField> fields) {
  return pullback_drift_gradient(bank, bank.extract(patches), patches, fields);
}

std::vector<Volume> pullback_drift_gradient(const FeatureBank& bank, const Extraction& forward,
                                            std::span<const Volume> patches, std::span<const DriftField> fields) {
  std::vector<FamilyFeatures> cotangents;
  for (const DriftField& f : fields) {
    if (!bank.config().enabled(f.family)) {
      throw std::invalid_argument("pullback_drift_gradient: family " + std::string(family_name(f.family)) +
                                  " is not enabled in the bank");
    }
    for (const FamilyFeatures& seen : cotangents) {
      if (seen.family == f.family) {
        throw std::invalid_argument("pullback_drift_gradient: duplicate family " +
                                    std::string(family_name(f.family)));
      }
    }
    if (!(f.scale > 0.0)) throw std::invalid_argument("pullback_drift_gradient: nonpositive scale");
    // d(0.5||H/S - sg(target)||^2)/dH = (H/S - target)/S = -V/S.
    Tensor3 g = f.v;
    g *= -1.0 / f.scale;
    cotangents.push_back({f.family, std::move(g)});
  }
  return bank.vjp(forward, patches, cotangents);
}

}  // namespace gdrift
