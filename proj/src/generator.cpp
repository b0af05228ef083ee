#include "gdrift/generator.hpp"

#include "gdrift/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gdrift {
namespace {

struct Layer {
  std::size_t in;
  std::size_t out;
  std::size_t offset;  // weights start; biases follow at offset + in * out
};

std::vector<Layer> layers(const GeneratorConfig& arch) {
  std::vector<Layer> out;
  std::size_t in = arch.inputs();
  std::size_t off = 0;
  for (std::size_t w : arch.hidden) {
    out.push_back({in, w, off});
    off += in * w + w;
    in = w;
  }
  out.push_back({in, 1, off});
  return out;
}

using MapConst = Eigen::Map<const Matrix>;

MapConst weights(const Vector& p, const Layer& l) {
  return {p.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
}

Eigen::Map<const Eigen::RowVectorXd> bias(const Vector& p, const Layer& l) {
  return {p.data() + l.offset + l.in * l.out, static_cast<Eigen::Index>(l.out)};
}

// voxels x inputs neighborhood matrix with replicate padding.
Matrix gather(const Volume& v, std::size_t r) {
  const Dims3 d = v.dims();
  const std::size_t k = 2 * r + 1;
  Matrix f(static_cast<Eigen::Index>(d.count()), static_cast<Eigen::Index>(k * k * k));
  const auto clampi = [](std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  const auto rr = static_cast<std::ptrdiff_t>(r);
  std::size_t row = 0;
  for (std::size_t z = 0; z < d.d; ++z) {
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t x = 0; x < d.w; ++x, ++row) {
        std::size_t col = 0;
        for (std::ptrdiff_t dz = -rr; dz <= rr; ++dz) {
          const std::size_t zz = clampi(static_cast<std::ptrdiff_t>(z) + dz, d.d);
          for (std::ptrdiff_t dy = -rr; dy <= rr; ++dy) {
            const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, d.h);
            for (std::ptrdiff_t dx = -rr; dx <= rr; ++dx, ++col) {
              f(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                  v.at(zz, yy, clampi(static_cast<std::ptrdiff_t>(x) + dx, d.w));
            }
          }
        }
      }
    }
  }
  return f;
}

void leaky(Matrix& a, double slope) { a = a.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; }); }

void check_params(const GeneratorConfig& arch, const Vector& params) {
  if (static_cast<std::size_t>(params.size()) != arch.parameter_count()) {
    throw std::invalid_argument("generator: parameter count does not match the architecture");
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (hidden.empty()) throw std::invalid_argument("GeneratorConfig: no hidden layers");
  for (std::size_t w : hidden) {
    if (w == 0) throw std::invalid_argument("GeneratorConfig: zero hidden width");
  }
}

std::size_t GeneratorConfig::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers(*this)) n += l.in * l.out + l.out;
  return n;
}

void GeneratorState::validate() const {
  arch.validate();
  check_params(arch, params);
  if (!params.allFinite()) throw std::invalid_argument("GeneratorState: non-finite parameters");
  if (opt.m.size() != params.size() || opt.v.size() != params.size()) {
    throw std::invalid_argument("GeneratorState: optimizer state size mismatch");
  }
}

GeneratorState init_generator(const GeneratorConfig& arch, std::uint64_t seed) {
  arch.validate();
  GeneratorState g;
  g.arch = arch;
  g.params = Vector::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  const auto ls = layers(arch);
  for (std::size_t i = 0; i + 1 < ls.size(); ++i) {
    Rng rng(derive_seed(seed, {i}));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(ls[i].in)));
    for (std::size_t j = 0; j < ls[i].in * ls[i].out; ++j) g.params[static_cast<Eigen::Index>(ls[i].offset + j)] = normal(rng);
  }
  g.opt.m = Vector::Zero(g.params.size());
  g.opt.v = Vector::Zero(g.params.size());
  return g;
}

Volume generator_forward(const GeneratorConfig& arch, const Vector& params, const Volume& src) {
  check_params(arch, params);
  const auto ls = layers(arch);
  Matrix a = gather(src, arch.radius);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    Matrix next = a * weights(params, ls[i]).transpose();
    next.rowwise() += bias(params, ls[i]);
    if (i + 1 < ls.size()) leaky(next, arch.negative_slope);
    a = std::move(next);
  }
  Volume out = src;
  auto o = out.data();
  for (std::size_t v = 0; v < o.size(); ++v) o[v] += a(static_cast<Eigen::Index>(v), 0);
  return out;
}

std::vector<Volume> generator_forward(const GeneratorState& g, std::span<const Volume> src) {
  std::vector<Volume> out;
  out.reserve(src.size());
  for (const Volume& v : src) out.push_back(generator_forward(g.arch, g.params, v));
  return out;
}

Vector generator_vjp(const GeneratorConfig& arch, const Vector& params, std::span<const Volume> src,
                     std::span<const Volume> out_cotangent) {
  check_params(arch, params);
  if (src.size() != out_cotangent.size()) throw std::invalid_argument("generator_vjp: batch size mismatch");
  const auto ls = layers(arch);
  Vector grad = Vector::Zero(params.size());
  for (std::size_t b = 0; b < src.size(); ++b) {
    if (src[b].dims() != out_cotangent[b].dims()) throw std::invalid_argument("generator_vjp: shape mismatch");
    std::vector<Matrix> acts{gather(src[b], arch.radius)};
    std::vector<Matrix> pre;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      Matrix z = acts.back() * weights(params, ls[i]).transpose();
      z.rowwise() += bias(params, ls[i]);
      pre.push_back(z);
      if (i + 1 < ls.size()) {
        leaky(z, arch.negative_slope);
        acts.push_back(std::move(z));
      }
    }
    const auto ct = out_cotangent[b].data();
    Matrix g = Eigen::Map<const Matrix>(ct.data(), static_cast<Eigen::Index>(ct.size()), 1);
    for (std::size_t i = ls.size(); i-- > 0;) {
      const Layer& l = ls[i];
      if (i + 1 < ls.size()) {
        const Matrix& z = pre[i];
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          for (Eigen::Index c = 0; c < g.cols(); ++c) {
            if (!(z(r, c) > 0.0)) g(r, c) *= arch.negative_slope;
          }
        }
      }
      Eigen::Map<Matrix> gw(grad.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
      gw.noalias() += g.transpose() * acts[i];
      Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + l.offset + l.in * l.out, static_cast<Eigen::Index>(l.out));
      gb += g.colwise().sum();
      if (i > 0) g = g * weights(params, l);
    }
  }
  return grad;
}

Vector generator_vjp(const GeneratorState& g, std::span<const Volume> src, std::span<const Volume> out_cotangent) {
  return generator_vjp(g.arch, g.params, src, out_cotangent);
}

void AdamConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("AdamConfig: negative learning rate");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("AdamConfig: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("AdamConfig: eps must be positive");
  if (!(min_lr_ratio >= 0.0 && min_lr_ratio <= 1.0)) throw std::invalid_argument("AdamConfig: min_lr_ratio outside [0, 1]");
}

double scheduled_lr(const AdamConfig& cfg, std::uint64_t step, std::uint64_t total_steps) {
  if (step == 0) step = 1;
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps) {
    return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  if (total_steps <= cfg.warmup_steps) return cfg.lr;
  const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup_steps) /
                                            static_cast<double>(total_steps - cfg.warmup_steps));
  const double floor = cfg.min_lr_ratio * cfg.lr;
  return floor + 0.5 * (cfg.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_update(GeneratorState& g, const Vector& grad, const AdamConfig& cfg, double lr) {
  if (grad.size() != g.params.size()) throw std::invalid_argument("adam_update: gradient size mismatch");
  g.opt.t += 1;
  const double t = static_cast<double>(g.opt.t);
  g.opt.m = cfg.beta1 * g.opt.m + (1.0 - cfg.beta1) * grad;
  g.opt.v = cfg.beta2 * g.opt.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  g.params.array() -= lr * (g.opt.m.array() / c1) / ((g.opt.v.array() / c2).sqrt() + cfg.eps);
}

}  // namespace gdrift
