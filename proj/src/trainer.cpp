#include "gdrift/trainer.hpp"

#include "gdrift/descriptor_autodiff.hpp"
#include "gdrift/rng.hpp"
#include "gdrift/spectrum.hpp"
#include "gdrift/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace gdrift {
namespace {

// Row i of the result is row (i + 1) mod N of t.
Tensor3 shift_rows(const Tensor3& t) {
  Tensor3 out(t.n(), t.m(), t.c());
  const std::size_t row = t.m() * t.c();
  const auto src = t.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < t.n(); ++i) {
    const std::size_t from = (i + 1) % t.n();
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(from * row),
              src.begin() + static_cast<std::ptrdiff_t>((from + 1) * row),
              dst.begin() + static_cast<std::ptrdiff_t>(i * row));
  }
  return out;
}

Vector flatten(std::span<const Volume> vs) {
  std::size_t n = 0;
  for (const Volume& v : vs) n += v.size();
  Vector out(static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (const Volume& v : vs) {
    for (double x : v.data()) out[k++] = x;
  }
  return out;
}

std::vector<Volume> unflatten(const Vector& flat, std::span<const Volume> like) {
  std::vector<Volume> out;
  Eigen::Index k = 0;
  for (const Volume& v : like) {
    Volume o(v.dims());
    for (double& x : o.data()) x = flat[k++];
    out.push_back(std::move(o));
  }
  return out;
}

struct Sampled {
  std::vector<Volume> gen;
  std::vector<Volume> pos;
  std::vector<std::size_t> item;
  std::vector<Origin> origins;
};

Sampled sample_pairs(std::span<const Volume> preds, std::span<const Volume> targets, const TrainConfig& cfg,
                     std::uint64_t tag, std::uint64_t step) {
  Sampled s;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    SubVolumeBatch g = sample_subvolumes(preds[i], cfg.subvolumes, cfg.subvolume, derive_seed(cfg.seed, {tag, step, i}));
    SubVolumeBatch p = sample_at(targets[i], g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      s.gen.push_back(std::move(g.patches[k]));
      s.pos.push_back(std::move(p.patches[k]));
      s.item.push_back(i);
      s.origins.push_back(g.origins[k]);
    }
  }
  return s;
}

std::vector<Volume> scatter(std::span<const Volume> patch_grads, const std::vector<std::size_t>& item,
                            const std::vector<Origin>& origins, std::span<const Volume> like) {
  std::vector<Volume> out;
  for (const Volume& v : like) out.emplace_back(v.dims());
  for (std::size_t k = 0; k < patch_grads.size(); ++k) scatter_add_patch(out[item[k]], patch_grads[k], origins[k]);
  return out;
}

void split_batch(std::span<const PhantomPair> batch, std::vector<Volume>& src, std::vector<Volume>& tgt) {
  for (const PhantomPair& p : batch) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
}

StepGradient step_gradient_impl(const GeneratorState& g, std::span<const PhantomPair> batch, const TrainConfig& cfg,
                                std::uint64_t step) {
  if (batch.size() < 2) throw std::invalid_argument("batch size must be at least 2");
  std::vector<Volume> sources;
  std::vector<Volume> targets;
  split_batch(batch, sources, targets);

  StepGradient out;
  out.metrics.step = step;
  const std::vector<Volume> preds = generator_forward(g, sources);
  FidelityResult fid = fidelity_loss(preds, targets);
  out.metrics.l_fid = fid.loss;
  const Vector g_fid = flatten(fid.grad);
  out.metrics.grad_norm_fid = g_fid.norm();

  const double lambda = cfg.drift.lambda_drift;
  out.frozen.lambda = lambda;
  if (lambda == 0.0) {
    out.frozen.alpha_fid = 1.0;
    out.frozen.alpha_drift = 0.0;
    out.metrics.alpha_fid = 1.0;
    out.metrics.alpha_drift = 0.0;
    out.param_grad = generator_vjp(g, sources, fid.grad);
    return out;
  }

  const FeatureBank bank(cfg.bank);
  const Sampled s = sample_pairs(preds, targets, cfg, 4, step);
  const Extraction eg = bank.extract(s.gen);
  const Extraction ep = bank.extract(s.pos);
  std::vector<DriftField> fields;
  double l_drift = 0.0;
  for (const FamilyFeatures& ff : eg.families) {
    FeatureTriplet t{ff.family, ff.features, ep.features(ff.family), shift_rows(ff.features)};
    DriftField field = compute_drift_field(t, cfg.drift);
    Tensor3 h_norm = ff.features;
    h_norm *= 1.0 / field.scale;
    DriftLossResult dl = drift_loss(h_norm, field);
    l_drift += dl.loss;
    out.frozen.families.push_back({ff.family, field.scale, std::move(dl.target)});
    fields.push_back(std::move(field));
  }
  out.metrics.l_drift = l_drift;
  const std::vector<Volume> patch_grads = pullback_drift_gradient(bank, eg, s.gen, fields);
  const std::vector<Volume> drift_grad = scatter(patch_grads, s.item, s.origins, preds);
  const Vector g_drift = flatten(drift_grad);
  out.metrics.grad_norm_drift = lambda * g_drift.norm();

  const Coordination c = coordinate(g_fid, g_drift, lambda, cfg.mgda);
  out.metrics.alpha_fid = c.weights.alpha[0];
  out.metrics.alpha_drift = c.weights.alpha[1];
  out.frozen.alpha_fid = c.weights.alpha[0];
  out.frozen.alpha_drift = c.weights.alpha[1];
  out.frozen.item = s.item;
  out.frozen.origins = s.origins;
  out.frozen.shape = cfg.subvolume;
  out.param_grad = generator_vjp(g, sources, unflatten(c.combined, preds));
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  drift.validate();
  bank.validate();
  generator.validate();
  phantom.validate();
  optimizer.validate();
  if (mgda.max_iters <= 0) throw std::invalid_argument("TrainConfig: mgda.max_iters must be positive");
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be at least 2");
  if (train_pairs < batch_size) throw std::invalid_argument("TrainConfig: train_pairs smaller than batch_size");
  if (eval_pairs == 0) throw std::invalid_argument("TrainConfig: eval_pairs must be positive");
  if (subvolumes == 0) throw std::invalid_argument("TrainConfig: subvolumes must be positive");
  if (!subvolume.fits_inside(volume)) throw std::invalid_argument("TrainConfig: subvolume larger than volume");
  if (spectrum_bands < 2) throw std::invalid_argument("TrainConfig: spectrum_bands must be at least 2");
  SurrogateEncoder(bank.encoder).check_input(subvolume);
}

FidelityResult fidelity_loss(std::span<const Volume> y, std::span<const Volume> y_gt) {
  if (y.size() != y_gt.size()) throw std::invalid_argument("fidelity_loss: batch size mismatch");
  std::size_t count = 0;
  for (std::size_t b = 0; b < y.size(); ++b) {
    if (y[b].dims() != y_gt[b].dims()) throw std::invalid_argument("fidelity_loss: shape mismatch");
    count += y[b].size();
  }
  FidelityResult r;
  if (count == 0) return r;
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t b = 0; b < y.size(); ++b) {
    Volume g(y[b].dims());
    const auto a = y[b].data();
    const auto t = y_gt[b].data();
    auto gd = g.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - t[i];
      sum += std::abs(d);
      gd[i] = d > 0.0 ? inv : d < 0.0 ? -inv : 0.0;
    }
    r.grad.push_back(std::move(g));
  }
  r.loss = sum * inv;
  return r;
}

StepGradient compute_step_gradient(const GeneratorState& g, std::span<const PhantomPair> batch,
                                   const TrainConfig& cfg, std::uint64_t step) {
  const std::string ctx = "train step " + std::to_string(step) + ": ";
  try {
    return step_gradient_impl(g, batch, cfg, step);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(ctx + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(ctx + e.what());
  }
}

StepMetrics train_step(GeneratorState& g, std::span<const PhantomPair> batch, const TrainConfig& cfg,
                       std::uint64_t step) {
  const StepGradient sg = compute_step_gradient(g, batch, cfg, step);
  adam_update(g, sg.param_grad, cfg.optimizer, scheduled_lr(cfg.optimizer, step, cfg.total_steps()));
  return sg.metrics;
}

double frozen_total_loss(const FrozenObjective& f, const FeatureBank& bank, const GeneratorConfig& arch,
                         const Vector& params, std::span<const PhantomPair> batch) {
  std::vector<Volume> sources;
  std::vector<Volume> targets;
  split_batch(batch, sources, targets);
  std::vector<Volume> preds;
  for (const Volume& s : sources) preds.push_back(generator_forward(arch, params, s));
  double total = f.alpha_fid * fidelity_loss(preds, targets).loss;
  if (f.families.empty()) return total;
  std::vector<Volume> patches;
  for (std::size_t k = 0; k < f.origins.size(); ++k) patches.push_back(extract_patch(preds[f.item[k]], f.origins[k], f.shape));
  const Extraction ex = bank.extract(patches);
  double l_drift = 0.0;
  for (const FrozenFamily& ff : f.families) {
    const auto h = ex.features(ff.family).data();
    const auto t = ff.target.data();
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double r = h[i] / ff.scale - t[i];
      l_drift += 0.5 * r * r;
    }
  }
  return total + f.alpha_drift * f.lambda * l_drift;
}

Vector frozen_total_gradient(const FrozenObjective& f, const FeatureBank& bank, const GeneratorConfig& arch,
                             const Vector& params, std::span<const PhantomPair> batch) {
  std::vector<Volume> sources;
  std::vector<Volume> targets;
  split_batch(batch, sources, targets);
  std::vector<Volume> preds;
  for (const Volume& s : sources) preds.push_back(generator_forward(arch, params, s));
  FidelityResult fid = fidelity_loss(preds, targets);
  std::vector<Volume> out = std::move(fid.grad);
  for (Volume& v : out) {
    for (double& x : v.data()) x *= f.alpha_fid;
  }
  if (!f.families.empty()) {
    std::vector<Volume> patches;
    for (std::size_t k = 0; k < f.origins.size(); ++k) patches.push_back(extract_patch(preds[f.item[k]], f.origins[k], f.shape));
    const Extraction ex = bank.extract(patches);
    std::vector<FamilyFeatures> cot;
    const double w = f.alpha_drift * f.lambda;
    for (const FrozenFamily& ff : f.families) {
      Tensor3 c = ex.features(ff.family);
      auto cd = c.data();
      const auto t = ff.target.data();
      for (std::size_t i = 0; i < cd.size(); ++i) cd[i] = w * (cd[i] / ff.scale - t[i]) / ff.scale;
      cot.push_back({ff.family, std::move(c)});
    }
    const std::vector<Volume> pg = bank.vjp(ex, patches, cot);
    for (std::size_t k = 0; k < pg.size(); ++k) scatter_add_patch(out[f.item[k]], pg[k], f.origins[k]);
  }
  return generator_vjp(arch, params, sources, out);
}

std::vector<PhantomPair> training_set(const TrainConfig& cfg) {
  std::vector<PhantomPair> out;
  for (std::size_t i = 0; i < cfg.train_pairs; ++i) {
    out.push_back(generate_phantom_pair(derive_seed(cfg.seed, {1, i}), cfg.volume, cfg.phantom));
  }
  return out;
}

std::vector<PhantomPair> evaluation_set(const TrainConfig& cfg) {
  std::vector<PhantomPair> out;
  for (std::size_t i = 0; i < cfg.eval_pairs; ++i) {
    out.push_back(generate_phantom_pair(derive_seed(cfg.seed, {2, i}), cfg.volume, cfg.phantom));
  }
  return out;
}

std::vector<std::size_t> batch_indices(const TrainConfig& cfg, std::uint64_t step) {
  if (step == 0) throw std::invalid_argument("batch_indices: steps are 1-based");
  const std::size_t per_epoch = cfg.steps_per_epoch();
  const std::uint64_t epoch = (step - 1) / per_epoch;
  const std::size_t slot = (step - 1) % per_epoch;
  std::vector<std::size_t> perm(cfg.train_pairs);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(cfg.seed, {5, epoch}));
  std::shuffle(perm.begin(), perm.end(), rng);
  return {perm.begin() + static_cast<std::ptrdiff_t>(slot * cfg.batch_size),
          perm.begin() + static_cast<std::ptrdiff_t>((slot + 1) * cfg.batch_size)};
}

TrainState init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.generator = init_generator(cfg.generator, derive_seed(cfg.seed, {3}));
  return s;
}

void run_training(TrainState& state, const TrainConfig& cfg, std::span<const PhantomPair> data, std::uint64_t until,
                  const std::function<void(const TrainState&)>& on_step) {
  cfg.validate();
  if (data.size() != cfg.train_pairs) throw std::invalid_argument("run_training: dataset size mismatch");
  for (std::uint64_t step = state.step + 1; step <= until; ++step) {
    std::vector<PhantomPair> batch;
    for (std::size_t i : batch_indices(cfg, step)) batch.push_back(data[i]);
    state.history.push_back(train_step(state.generator, batch, cfg, step));
    state.step = step;
    if (on_step) on_step(state);
  }
}

EvalReport evaluate(const GeneratorState& g, const TrainConfig& cfg, std::span<const PhantomPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: empty evaluation set");
  EvalReport r;
  r.residual_bands.assign(cfg.spectrum_bands, 0.0);
  std::vector<Volume> preds;
  std::vector<Volume> targets;
  double abs_sum = 0.0;
  double id_sum = 0.0;
  std::size_t count = 0;
  for (const PhantomPair& p : pairs) {
    Volume y = generator_forward(g.arch, g.params, p.source);
    for (double& v : y.data()) v = std::clamp(v, 0.0, 1.0);
    Volume residual(y.dims());
    const auto a = y.data();
    const auto s = p.source.data();
    const auto t = p.target.data();
    auto res = residual.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      res[i] = a[i] - t[i];
      abs_sum += std::abs(res[i]);
      id_sum += std::abs(s[i] - t[i]);
    }
    count += a.size();
    const std::vector<double> bands = radial_power_spectrum(residual, cfg.spectrum_bands);
    for (std::size_t b = 0; b < bands.size(); ++b) r.residual_bands[b] += bands[b] / static_cast<double>(pairs.size());
    preds.push_back(std::move(y));
    targets.push_back(p.target);
  }
  r.mae = abs_sum / static_cast<double>(count);
  r.mae_identity = id_sum / static_cast<double>(count);

  const FeatureBank bank(cfg.bank);
  const Sampled s = sample_pairs(preds, targets, cfg, 6, 0);
  const Extraction ep = bank.extract(s.gen);
  const Extraction et = bank.extract(s.pos);
  for (const FamilyFeatures& ff : ep.families) {
    const Tensor3& x = ff.features;
    const Tensor3& y = et.features(ff.family);
    const auto rows = static_cast<Eigen::Index>(x.n());
    const auto cols = static_cast<Eigen::Index>(x.m() * x.c());
    const Matrix xm = Eigen::Map<const Matrix>(x.data().data(), rows, cols);
    const Matrix ym = Eigen::Map<const Matrix>(y.data().data(), rows, cols);
    const double e = energy_distance(xm, ym);
    double spread = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < rows; ++j) spread += (ym.row(i) - ym.row(j)).norm();
    }
    spread /= static_cast<double>(rows * rows);
    const double normalized = spread > 0.0 ? e / spread : e;
    r.feature_distances.push_back({ff.family, e, normalized});
    r.feature_energy_distance += normalized;
  }
  return r;
}

}  // namespace gdrift
