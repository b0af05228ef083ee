#include "gdrift/spectrum.hpp"
#include "gdrift/trainer.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace gdrift;
using gdrift::testing::gaussian_vector;
using gdrift::testing::random_volume;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.volume = {16, 32, 32};
  cfg.subvolume = {16, 32, 32};
  cfg.subvolumes = 2;
  cfg.batch_size = 2;
  cfg.train_pairs = 4;
  cfg.eval_pairs = 2;
  cfg.epochs = 2;
  cfg.seed = 7;
  cfg.drift.lambda_drift = 1e-3;
  cfg.optimizer.lr = 1e-2;
  return cfg;
}

// Naive per-voxel evaluation of the residual MLP.
Volume naive_generator(const GeneratorConfig& arch, const Vector& p, const Volume& src) {
  const Dims3 d = src.dims();
  const auto r = static_cast<std::ptrdiff_t>(arch.radius);
  Volume out(d);
  auto clampi = [](std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(std::max<std::ptrdiff_t>(i, 0), static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t z = 0; z < d.d; ++z) {
    for (std::size_t y = 0; y < d.h; ++y) {
      for (std::size_t x = 0; x < d.w; ++x) {
        std::vector<double> a;
        for (std::ptrdiff_t dz = -r; dz <= r; ++dz)
          for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
            for (std::ptrdiff_t dx = -r; dx <= r; ++dx)
              a.push_back(src.at(clampi(static_cast<std::ptrdiff_t>(z) + dz, d.d),
                                 clampi(static_cast<std::ptrdiff_t>(y) + dy, d.h),
                                 clampi(static_cast<std::ptrdiff_t>(x) + dx, d.w)));
        std::size_t off = 0;
        std::vector<std::size_t> widths = arch.hidden;
        widths.push_back(1);
        for (std::size_t l = 0; l < widths.size(); ++l) {
          const std::size_t in = a.size();
          std::vector<double> next(widths[l]);
          for (std::size_t o = 0; o < widths[l]; ++o) {
            double s = p[static_cast<Eigen::Index>(off + in * widths[l] + o)];
            for (std::size_t i = 0; i < in; ++i) s += p[static_cast<Eigen::Index>(off + o * in + i)] * a[i];
            if (l + 1 < widths.size() && s <= 0.0) s *= arch.negative_slope;
            next[o] = s;
          }
          off += in * widths[l] + widths[l];
          a = std::move(next);
        }
        out.at(z, y, x) = src.at(z, y, x) + a[0];
      }
    }
  }
  return out;
}

Vector random_params(const GeneratorConfig& arch, std::uint64_t seed, double sd = 0.3) {
  return gaussian_vector(seed, static_cast<Eigen::Index>(arch.parameter_count())) * sd;
}

}  // namespace

TEST(Phantom, DeterministicAndDegenerateDegradation) {
  const PhantomPair a = generate_phantom_pair(5, {16, 32, 32});
  const PhantomPair b = generate_phantom_pair(5, {16, 32, 32});
  EXPECT_EQ(a.source, b.source);
  EXPECT_EQ(a.target, b.target);
  EXPECT_NE(a.source, a.target);
  PhantomConfig clean;
  clean.blur_sigma_min = clean.blur_sigma_max = 0.0;
  clean.noise_sigma = 0.0;
  const PhantomPair c = generate_phantom_pair(5, {16, 32, 32}, clean);
  EXPECT_EQ(c.source, c.target);
  EXPECT_THROW(generate_phantom_pair(1, {8, 32, 32}), std::invalid_argument);
}

TEST(Phantom, TargetStatistics) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const PhantomPair p = generate_phantom_pair(s, {16, 32, 32});
    double mean = 0.0;
    for (double v : p.target.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
      mean += v;
    }
    for (double v : p.source.data()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
    mean /= static_cast<double>(p.target.size());
    EXPECT_GT(mean, 0.05) << "seed " << s;
    EXPECT_LT(mean, 0.8) << "seed " << s;
  }
}

TEST(GaussianBlur, IdentityAndConstantPreservation) {
  const Volume v = random_volume(1, {6, 7, 8});
  EXPECT_EQ(gaussian_blur(v, 0.0), v);
  const Volume c = gaussian_blur(Volume({6, 7, 8}, 0.4), 1.5);
  for (double x : c.data()) EXPECT_NEAR(x, 0.4, 1e-14);
  EXPECT_THROW(gaussian_blur(v, -1.0), std::invalid_argument);
}

TEST(Generator, ParameterCountIdentityAndLoopOracle) {
  const GeneratorConfig arch;
  EXPECT_EQ(arch.parameter_count(), 27u * 16 + 16 + 16 * 16 + 16 + 16 + 1);
  const Volume src = random_volume(2, {5, 6, 7});
  const GeneratorState fresh = init_generator(arch, 3);
  EXPECT_EQ(generator_forward(arch, fresh.params, src), src);
  EXPECT_EQ(generator_forward(arch, Vector::Zero(static_cast<Eigen::Index>(arch.parameter_count())), src), src);

  const Vector p = random_params(arch, 4);
  const Volume fast = generator_forward(arch, p, src);
  EXPECT_EQ(fast, generator_forward(arch, p, src));
  const Volume slow = naive_generator(arch, p, src);
  for (std::size_t i = 0; i < src.size(); ++i) EXPECT_NEAR(fast.data()[i], slow.data()[i], 1e-6);
  EXPECT_THROW(generator_forward(arch, Vector::Zero(5), src), std::invalid_argument);
}

TEST(Generator, VjpZeroAdditiveAndFiniteDifference) {
  const GeneratorConfig arch;
  const Vector p = random_params(arch, 5);
  const std::vector<Volume> src{random_volume(6, {6, 6, 6}), random_volume(7, {6, 6, 6})};
  const std::vector<Volume> zero{Volume({6, 6, 6}), Volume({6, 6, 6})};
  EXPECT_EQ(generator_vjp(arch, p, src, zero), Vector::Zero(p.size()));

  const std::vector<Volume> cot{random_volume(8, {6, 6, 6}, -1, 1), random_volume(9, {6, 6, 6}, -1, 1)};
  const Vector both = generator_vjp(arch, p, src, cot);
  const Vector a = generator_vjp(arch, p, std::span(src).first(1), std::span(cot).first(1));
  const Vector b = generator_vjp(arch, p, std::span(src).last(1), std::span(cot).last(1));
  EXPECT_LE((both - a - b).cwiseAbs().maxCoeff(), 1e-12 * both.cwiseAbs().maxCoeff());

  auto objective = [&](const Vector& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) s += gdrift::testing::dot(cot[i].data(), generator_forward(arch, q, src[i]).data());
    return s;
  };
  for (int probe = 0; probe < 10; ++probe) {
    const Vector dir = gaussian_vector(derive_seed(10, {static_cast<std::uint64_t>(probe)}), p.size());
    const double h = 1e-6;
    const double fd = (objective(p + h * dir) - objective(p - h * dir)) / (2.0 * h);
    EXPECT_LE(gdrift::testing::rel_err(fd, both.dot(dir)), 1e-4) << "probe " << probe;
  }
  EXPECT_THROW(generator_vjp(arch, p, src, std::span(cot).first(1)), std::invalid_argument);
}

TEST(Adam, ScheduleAndUpdate) {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.warmup_steps = 4;
  EXPECT_NEAR(scheduled_lr(cfg, 1, 100), 0.025, 1e-15);
  EXPECT_NEAR(scheduled_lr(cfg, 4, 100), 0.1, 1e-15);
  EXPECT_NEAR(scheduled_lr(cfg, 100, 100), 0.0, 1e-15);
  for (std::uint64_t s = 5; s < 100; ++s) EXPECT_LE(scheduled_lr(cfg, s + 1, 100), scheduled_lr(cfg, s, 100));

  GeneratorState g = init_generator(GeneratorConfig{}, 1);
  const Vector before = g.params;
  adam_update(g, Vector::Zero(g.params.size()), cfg, 0.1);
  EXPECT_EQ(g.params, before);  // zero gradient on fresh moments: no movement
  const Vector grad = gaussian_vector(2, g.params.size());
  adam_update(g, grad, cfg, 0.01);
  // t = 2 after bias correction: each coordinate moves 0.1/0.19 / sqrt(0.001/0.001999) * lr against its gradient.
  const double factor = (0.1 / 0.19) / std::sqrt(0.001 / (1.0 - 0.999 * 0.999));
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const double expect = -0.01 * factor * grad[i] / (std::abs(grad[i]) + 1e-8 / std::sqrt(0.001 / 0.001999));
    EXPECT_NEAR(g.params[i] - before[i], expect, 1e-10);
  }
}

TEST(Fidelity, ExamplesAndLoopOracle) {
  const std::vector<Volume> y{random_volume(11, {4, 5, 6}), random_volume(12, {4, 5, 6})};
  const FidelityResult same = fidelity_loss(y, y);
  EXPECT_EQ(same.loss, 0.0);
  for (const Volume& g : same.grad)
    for (double v : g.data()) EXPECT_EQ(v, 0.0);

  std::vector<Volume> shifted = y;
  for (Volume& v : shifted)
    for (double& x : v.data()) x += 0.25;
  const FidelityResult c = fidelity_loss(shifted, y);
  EXPECT_NEAR(c.loss, 0.25, 1e-15);
  for (const Volume& g : c.grad)
    for (double v : g.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 240.0);

  const std::vector<Volume> gt{random_volume(13, {4, 5, 6}), random_volume(14, {4, 5, 6})};
  const FidelityResult r = fidelity_loss(y, gt);
  double s = 0.0;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 120; ++i) {
      const double d = y[b].data()[i] - gt[b].data()[i];
      s += std::abs(d);
      const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
      EXPECT_EQ(r.grad[b].data()[i], sign / 240.0);
    }
  EXPECT_NEAR(r.loss, s / 240.0, 1e-10);
  EXPECT_THROW(fidelity_loss(y, std::span(gt).first(1)), std::invalid_argument);
}

TEST(Spectrum, ConstantParsevalAndSinusoid) {
  const std::vector<double> dc = radial_power_spectrum(Volume({8, 8, 8}, 0.5), 4);
  EXPECT_NEAR(dc[0], 0.25 * 512, 1e-9);
  for (std::size_t b = 1; b < 4; ++b) EXPECT_NEAR(dc[b], 0.0, 1e-9);

  const Volume r = random_volume(15, {12, 16, 20}, -1.0, 1.0);
  const std::vector<double> bands = radial_power_spectrum(r, 8);
  double total = 0.0, direct = 0.0;
  for (double b : bands) total += b;
  for (double v : r.data()) direct += v * v;
  EXPECT_LE(std::abs(total - direct), 1e-6 * direct);

  // f = 6/32 cycles per voxel along x falls in band floor(0.1875 / 0.0625) = 3 of 8.
  Volume s({16, 16, 32});
  for (std::size_t z = 0; z < 16; ++z)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 32; ++x) s.at(z, y, x) = std::cos(2.0 * std::numbers::pi * 6.0 * x / 32.0);
  const std::vector<double> tone = radial_power_spectrum(s, 8);
  const double sum = std::accumulate(tone.begin(), tone.end(), 0.0);
  EXPECT_GE(tone[3], (1.0 - 1e-9) * sum);
  EXPECT_THROW(radial_power_spectrum(s, 1), std::invalid_argument);
}

TEST(TrainStep, LambdaZeroIsFidelityOnly) {
  TrainConfig cfg = small_config();
  const std::vector<PhantomPair> data = training_set(cfg);
  const std::vector<PhantomPair> batch{data[0], data[1]};
  GeneratorState g = init_train_state(cfg).generator;
  g.params = random_params(cfg.generator, 16, 0.1);

  TrainConfig off = cfg;
  off.drift.lambda_drift = 0.0;
  const StepGradient zero = compute_step_gradient(g, batch, off, 1);
  std::vector<Volume> src{batch[0].source, batch[1].source}, tgt{batch[0].target, batch[1].target};
  const FidelityResult fid = fidelity_loss(generator_forward(g, src), tgt);
  EXPECT_EQ(zero.param_grad, generator_vjp(g, src, fid.grad));
  EXPECT_EQ(zero.metrics.alpha_fid, 1.0);
  EXPECT_EQ(zero.metrics.alpha_drift, 0.0);
  EXPECT_EQ(zero.metrics.l_drift, 0.0);

  const StepGradient full = compute_step_gradient(g, batch, cfg, 1);
  EXPECT_EQ(full.metrics.l_fid, zero.metrics.l_fid);
  EXPECT_GT(full.metrics.l_drift, 0.0);
  EXPECT_GE(full.metrics.alpha_fid, 0.0);
  EXPECT_GE(full.metrics.alpha_drift, 0.0);
  EXPECT_NEAR(full.metrics.alpha_fid + full.metrics.alpha_drift, 1.0, 1e-12);

  GeneratorState a = g, b = g;
  adam_update(a, zero.param_grad, off.optimizer, scheduled_lr(off.optimizer, 1, off.total_steps()));
  train_step(b, batch, off, 1);
  EXPECT_EQ(a.params, b.params);
}

TEST(TrainStep, DeterministicAndErrorsCarryStep) {
  const TrainConfig cfg = small_config();
  const std::vector<PhantomPair> data = training_set(cfg);
  const std::vector<PhantomPair> batch{data[2], data[3]};
  const GeneratorState g = init_train_state(cfg).generator;
  const StepGradient a = compute_step_gradient(g, batch, cfg, 3);
  const StepGradient b = compute_step_gradient(g, batch, cfg, 3);
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(a.param_grad, b.param_grad);
  try {
    compute_step_gradient(g, std::span(batch).first(1), cfg, 9);
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("step 9"), std::string::npos) << e.what();
  }
}

TEST(TrainStep, FrozenObjectiveGradientMatchesFiniteDifferences) {
  TrainConfig cfg = small_config();
  cfg.drift.lambda_drift = 1e-2;
  const std::vector<PhantomPair> data = training_set(cfg);
  const std::vector<PhantomPair> batch{data[0], data[3]};
  GeneratorState g = init_train_state(cfg).generator;
  g.params = random_params(cfg.generator, 17, 0.05);
  const StepGradient sg = compute_step_gradient(g, batch, cfg, 2);
  const FeatureBank bank(cfg.bank);
  const Vector grad = frozen_total_gradient(sg.frozen, bank, cfg.generator, g.params, batch);
  EXPECT_LE((grad - sg.param_grad).cwiseAbs().maxCoeff(), 1e-10 * sg.param_grad.cwiseAbs().maxCoeff());
  for (int probe = 0; probe < 5; ++probe) {
    const Vector dir = gaussian_vector(derive_seed(18, {static_cast<std::uint64_t>(probe)}), g.params.size());
    const double h = 1e-6;
    const double fd = (frozen_total_loss(sg.frozen, bank, cfg.generator, g.params + h * dir, batch) -
                       frozen_total_loss(sg.frozen, bank, cfg.generator, g.params - h * dir, batch)) /
                      (2.0 * h);
    EXPECT_LE(gdrift::testing::rel_err(fd, grad.dot(dir)), 1e-3) << "probe " << probe;
  }
}

TEST(Training, BatchIndicesArePerEpochPermutations) {
  TrainConfig cfg = small_config();
  cfg.train_pairs = 6;
  for (std::uint64_t epoch = 0; epoch < 3; ++epoch) {
    std::vector<std::size_t> seen;
    for (std::uint64_t slot = 0; slot < 3; ++slot) {
      const auto idx = batch_indices(cfg, epoch * 3 + slot + 1);
      EXPECT_EQ(idx.size(), 2u);
      seen.insert(seen.end(), idx.begin(), idx.end());
    }
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  }
  EXPECT_THROW(batch_indices(cfg, 0), std::invalid_argument);
}

TEST(Training, ResumeIsBitExact) {
  const TrainConfig cfg = small_config();
  const std::vector<PhantomPair> data = training_set(cfg);
  TrainState full = init_train_state(cfg);
  run_training(full, cfg, data, cfg.total_steps());
  TrainState part = init_train_state(cfg);
  run_training(part, cfg, data, 1);
  const TrainState copy = part;
  run_training(part, cfg, data, cfg.total_steps());
  EXPECT_EQ(copy.step, 1u);
  EXPECT_EQ(part.history, full.history);
  EXPECT_EQ(part.generator.params, full.generator.params);
  EXPECT_EQ(part.generator.opt.v, full.generator.opt.v);
  for (const StepMetrics& m : full.history) {
    EXPECT_GE(m.alpha_fid, 0.0);
    EXPECT_GE(m.alpha_drift, 0.0);
    EXPECT_NEAR(m.alpha_fid + m.alpha_drift, 1.0, 1e-12);
  }
}

TEST(Evaluate, IdentityGeneratorMatchesSourceError) {
  const TrainConfig cfg = small_config();
  const std::vector<PhantomPair> pairs = evaluation_set(cfg);
  const GeneratorState g = init_train_state(cfg).generator;
  const EvalReport r = evaluate(g, cfg, pairs);
  EXPECT_NEAR(r.mae, r.mae_identity, 1e-15);
  EXPECT_EQ(r.residual_bands.size(), cfg.spectrum_bands);
  EXPECT_EQ(r.feature_distances.size(), 5u);
  double sum = 0.0;
  for (const FamilyDistance& d : r.feature_distances) sum += d.normalized;
  EXPECT_NEAR(sum, r.feature_energy_distance, 1e-12);
  EXPECT_THROW(evaluate(g, cfg, {}), std::invalid_argument);
}
