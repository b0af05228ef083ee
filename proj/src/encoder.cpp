#include "gdrift/encoder.hpp"

#include "gdrift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gdrift {
namespace {

std::size_t out_extent(std::size_t in, std::size_t k, std::size_t stride) {
  const std::size_t pad = k / 2;
  return (in + 2 * pad - k) / stride + 1;
}

// Range of output indices o with 0 <= o * stride + kk - pad < in.
struct OutRange {
  std::size_t lo = 0;
  std::size_t hi = 0;  // exclusive
};

OutRange valid_outputs(std::size_t out, std::size_t in, std::size_t kk, std::size_t pad, std::size_t stride) {
  OutRange r;
  // o * stride >= pad - kk
  if (kk < pad) r.lo = (pad - kk + stride - 1) / stride;
  // o * stride + kk - pad <= in - 1
  const std::ptrdiff_t top = static_cast<std::ptrdiff_t>(in) - 1 + static_cast<std::ptrdiff_t>(pad) -
                             static_cast<std::ptrdiff_t>(kk);
  if (top < 0) {
    r.hi = r.lo;
    return r;
  }
  r.hi = std::min(out, static_cast<std::size_t>(top) / stride + 1);
  if (r.hi < r.lo) r.hi = r.lo;
  return r;
}

}  // namespace

void EncoderConfig::validate() const {
  if (channels.empty()) throw std::invalid_argument("EncoderConfig: no stages");
  for (std::size_t c : channels) {
    if (c == 0) throw std::invalid_argument("EncoderConfig: zero channel count");
  }
  if (kernel == 0 || kernel % 2 == 0) throw std::invalid_argument("EncoderConfig: kernel must be odd");
  if (stride == 0) throw std::invalid_argument("EncoderConfig: stride must be positive");
}

SurrogateEncoder::SurrogateEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::size_t k3 = cfg_.kernel * cfg_.kernel * cfg_.kernel;
  kernels_.resize(num_stages());
  for (std::size_t s = 0; s < num_stages(); ++s) {
    const std::size_t fan_in = in_channels(s) * k3;
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng(derive_seed(cfg_.seed, {s}));
    std::normal_distribution<double> normal;
    kernels_[s].resize(cfg_.channels[s] * fan_in);
    for (double& w : kernels_[s]) w = normal(rng) * scale;
  }
}

SurrogateEncoder::SurrogateEncoder(EncoderConfig cfg, std::vector<std::vector<double>> kernels)
    : cfg_(std::move(cfg)), kernels_(std::move(kernels)) {
  cfg_.validate();
  if (kernels_.size() != num_stages()) throw std::invalid_argument("SurrogateEncoder: kernel count mismatch");
  const std::size_t k3 = cfg_.kernel * cfg_.kernel * cfg_.kernel;
  for (std::size_t s = 0; s < num_stages(); ++s) {
    if (kernels_[s].size() != cfg_.channels[s] * in_channels(s) * k3) {
      throw std::invalid_argument("SurrogateEncoder: kernel size mismatch at stage " + std::to_string(s));
    }
  }
}

void SurrogateEncoder::check_input(const Dims3& input) const {
  std::size_t total = 1;
  for (std::size_t s = 0; s < num_stages(); ++s) total *= cfg_.stride;
  if (input.count() == 0 || input.d % total != 0 || input.h % total != 0 || input.w % total != 0) {
    throw std::invalid_argument("SurrogateEncoder: patch dims must be divisible by the cumulative stride " +
                                std::to_string(total));
  }
}

Dims3 SurrogateEncoder::stage_dims(std::size_t stage, const Dims3& input) const {
  Dims3 d = input;
  for (std::size_t s = 0; s <= stage; ++s) {
    d = {out_extent(d.d, cfg_.kernel, cfg_.stride), out_extent(d.h, cfg_.kernel, cfg_.stride),
         out_extent(d.w, cfg_.kernel, cfg_.stride)};
  }
  return d;
}

FeatureMap SurrogateEncoder::conv(std::size_t stage, const FeatureMap& in) const {
  const std::size_t k = cfg_.kernel;
  const std::size_t pad = k / 2;
  const std::size_t st = cfg_.stride;
  const Dims3 id = in.dims();
  const Dims3 od{out_extent(id.d, k, st), out_extent(id.h, k, st), out_extent(id.w, k, st)};
  const std::size_t cin = in.channels();
  const std::size_t cout = cfg_.channels[stage];
  const auto& w = kernels_[stage];

  FeatureMap out(cout, od);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t kz = 0; kz < k; ++kz) {
        const OutRange rz = valid_outputs(od.d, id.d, kz, pad, st);
        for (std::size_t ky = 0; ky < k; ++ky) {
          const OutRange ry = valid_outputs(od.h, id.h, ky, pad, st);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const OutRange rx = valid_outputs(od.w, id.w, kx, pad, st);
            const double wv = w[(((co * cin + ci) * k + kz) * k + ky) * k + kx];
            for (std::size_t oz = rz.lo; oz < rz.hi; ++oz) {
              const std::size_t iz = oz * st + kz - pad;
              for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                const std::size_t iy = oy * st + ky - pad;
                const double* src = &in.at(ci, iz, iy, 0);
                double* dst = &out.at(co, oz, oy, 0);
                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) dst[ox] += wv * src[ox * st + kx - pad];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

FeatureMap SurrogateEncoder::conv_transpose(std::size_t stage, const FeatureMap& g_out, const Dims3& id) const {
  const std::size_t k = cfg_.kernel;
  const std::size_t pad = k / 2;
  const std::size_t st = cfg_.stride;
  const Dims3 od = g_out.dims();
  const std::size_t cin = in_channels(stage);
  const std::size_t cout = cfg_.channels[stage];
  const auto& w = kernels_[stage];

  FeatureMap g_in(cin, id);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t kz = 0; kz < k; ++kz) {
        const OutRange rz = valid_outputs(od.d, id.d, kz, pad, st);
        for (std::size_t ky = 0; ky < k; ++ky) {
          const OutRange ry = valid_outputs(od.h, id.h, ky, pad, st);
          for (std::size_t kx = 0; kx < k; ++kx) {
            const OutRange rx = valid_outputs(od.w, id.w, kx, pad, st);
            const double wv = w[(((co * cin + ci) * k + kz) * k + ky) * k + kx];
            for (std::size_t oz = rz.lo; oz < rz.hi; ++oz) {
              const std::size_t iz = oz * st + kz - pad;
              for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                const std::size_t iy = oy * st + ky - pad;
                const double* src = &g_out.at(co, oz, oy, 0);
                double* dst = &g_in.at(ci, iz, iy, 0);
                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) dst[ox * st + kx - pad] += wv * src[ox];
              }
            }
          }
        }
      }
    }
  }
  return g_in;
}

EncoderStages SurrogateEncoder::encode(const Volume& x) const {
  check_input(x.dims());
  EncoderStages out;
  out.seed = cfg_.seed;
  out.input_dims = x.dims();
  FeatureMap current = FeatureMap::from_volume(x);
  for (std::size_t s = 0; s < num_stages(); ++s) {
    FeatureMap pre = conv(s, current);
    FeatureMap act = pre;
    for (double& v : act.data()) v = v > 0.0 ? v : cfg_.negative_slope * v;
    out.pre_activation.push_back(std::move(pre));
    out.stages.push_back(act);
    current = std::move(act);
  }
  return out;
}

std::vector<EncoderStages> SurrogateEncoder::encode(std::span<const Volume> batch) const {
  std::vector<EncoderStages> out;
  out.reserve(batch.size());
  for (const Volume& v : batch) out.push_back(encode(v));
  return out;
}

Volume SurrogateEncoder::vjp(const EncoderStages& fwd, std::span<const FeatureMap> stage_cotangents) const {
  if (fwd.stages.size() != num_stages() || stage_cotangents.size() != num_stages()) {
    throw std::invalid_argument("SurrogateEncoder::vjp: stage count mismatch");
  }
  if (fwd.seed != cfg_.seed) throw std::invalid_argument("SurrogateEncoder::vjp: encoder config mismatch");
  FeatureMap g;  // cotangent arriving from the stage above
  for (std::size_t s = num_stages(); s-- > 0;) {
    const FeatureMap& pre = fwd.pre_activation[s];
    FeatureMap total(pre.channels(), pre.dims());
    auto t = total.data();
    if (!stage_cotangents[s].data().empty()) {
      if (!stage_cotangents[s].same_shape(pre)) {
        throw std::invalid_argument("SurrogateEncoder::vjp: cotangent shape mismatch at stage " + std::to_string(s));
      }
      auto c = stage_cotangents[s].data();
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = c[i];
    }
    if (!g.data().empty()) {
      auto gd = g.data();
      for (std::size_t i = 0; i < t.size(); ++i) t[i] += gd[i];
    }
    // Leaky rectifier adjoint; the kink at zero takes the slope side.
    auto p = pre.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(p[i] > 0.0)) t[i] *= cfg_.negative_slope;
    }
    const Dims3 in_dims = s == 0 ? fwd.input_dims : fwd.pre_activation[s - 1].dims();
    g = conv_transpose(s, total, in_dims);
  }
  Volume out(fwd.input_dims);
  auto gd = g.data();
  std::copy(gd.begin(), gd.end(), out.data().begin());
  return out;
}

Volume SurrogateEncoder::vjp(const Volume& x, std::span<const FeatureMap> stage_cotangents) const {
  return vjp(encode(x), stage_cotangents);
}

}  // namespace gdrift
