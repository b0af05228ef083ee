#include "gdrift/transport.hpp"

#include "gdrift/drift_field.hpp"
#include "gdrift/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace gdrift {
namespace {

Tensor3 as_single_location(const Matrix& rows) {
  Tensor3 t(static_cast<std::size_t>(rows.rows()), 1, static_cast<std::size_t>(rows.cols()));
  t.flat() = rows;
  return t;
}

double mean_pairwise(const Matrix& a, const Matrix& b) {
  return pairwise_distances(a, b).mean();
}

}  // namespace

void ParticleCloud::validate() const {
  if (particles.rows() < 2) throw std::invalid_argument("ParticleCloud: need at least two particles");
  if (target_samples.rows() < 1) throw std::invalid_argument("ParticleCloud: no target samples");
  if (particles.cols() != target_samples.cols()) throw std::invalid_argument("ParticleCloud: dimension mismatch");
  if (!particles.allFinite() || !target_samples.allFinite()) {
    throw std::invalid_argument("ParticleCloud: non-finite coordinates");
  }
  if (!(eta >= 0.0)) throw std::invalid_argument("ParticleCloud: eta must be nonnegative");
}

DriftStepResult drift_step_detailed(const ParticleCloud& c, const DriftConfig& cfg) {
  c.validate();
  const Eigen::Index n = c.particles.rows();
  const Eigen::Index p = c.target_samples.rows();
  if (p < n) throw std::invalid_argument("drift_step: fewer target samples than particles");

  // Partial Fisher-Yates: the first n entries form a uniform subsample.
  Rng rng(derive_seed(c.seed, {c.step}));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, p - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  Matrix positives(n, c.particles.cols());
  for (Eigen::Index i = 0; i < n; ++i) positives.row(i) = c.target_samples.row(idx[static_cast<std::size_t>(i)]);

  FeatureTriplet t;
  t.h = as_single_location(c.particles);
  t.u_pos = as_single_location(positives);
  t.u_neg = t.h;
  const DriftField field = compute_drift_field(t, cfg);

  DriftStepResult r;
  // The field lives in scale-normalized coordinates; map it back.
  r.displacement = field.v.flat() * field.scale;
  r.cloud = c;
  r.cloud.particles += c.eta * r.displacement;
  r.cloud.step = c.step + 1;
  return r;
}

ParticleCloud drift_step(const ParticleCloud& c, const DriftConfig& cfg) {
  return drift_step_detailed(c, cfg).cloud;
}

TransportReport run_transport(const ParticleCloud& init, int steps, const DriftConfig& cfg) {
  if (steps < 1) throw std::invalid_argument("run_transport: steps must be at least 1");
  TransportReport report;
  report.energy_distance.reserve(static_cast<std::size_t>(steps) + 1);
  report.mean_drift_norm.reserve(static_cast<std::size_t>(steps) + 1);

  ParticleCloud cloud = init;
  report.energy_distance.push_back(energy_distance(cloud.particles, cloud.target_samples));
  for (int s = 0; s < steps; ++s) {
    DriftStepResult r = drift_step_detailed(cloud, cfg);
    report.mean_drift_norm.push_back(mean_row_norm(r.displacement));
    cloud = std::move(r.cloud);
    report.energy_distance.push_back(energy_distance(cloud.particles, cloud.target_samples));
  }
  // Drift magnitude at the final state, so both series have steps + 1 entries.
  report.mean_drift_norm.push_back(mean_row_norm(drift_step_detailed(cloud, cfg).displacement));
  report.final_particles = cloud.particles;
  return report;
}

double energy_distance(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0 || y.rows() == 0) throw std::invalid_argument("energy_distance: empty sample set");
  if (x.cols() != y.cols()) throw std::invalid_argument("energy_distance: dimension mismatch");
  const double e = 2.0 * mean_pairwise(x, y) - mean_pairwise(x, x) - mean_pairwise(y, y);
  return e;
}

double mean_row_norm(const Matrix& m) {
  if (m.rows() == 0) return 0.0;
  return m.rowwise().norm().mean();
}

DriftConfig transport_drift_defaults() {
  DriftConfig cfg;
  cfg.temperatures = {0.04, 0.1, 0.4};
  cfg.include_mask_in_scale = false;
  cfg.normalize_temperatures = false;
  return cfg;
}

void TransportSettings::validate() const {
  drift.validate();
  if (particles < 2) throw std::invalid_argument("TransportSettings: at least 2 particles required");
  if (targets < particles) throw std::invalid_argument("TransportSettings: targets must be at least particles");
  if (steps < 1) throw std::invalid_argument("TransportSettings: steps must be at least 1");
  if (!(eta >= 0.0)) throw std::invalid_argument("TransportSettings: eta must be nonnegative");
  if (!(init_sigma >= 0.0) || !(mixture_sigma >= 0.0)) throw std::invalid_argument("TransportSettings: negative sigma");
}

ParticleCloud mixture_cloud(const TransportSettings& s, std::uint64_t seed) {
  s.validate();
  ParticleCloud c;
  c.eta = s.eta;
  c.seed = derive_seed(seed, {0x71});
  Rng rng(derive_seed(seed, {0x70}));
  std::normal_distribution<double> normal;
  c.particles.resize(static_cast<Eigen::Index>(s.particles), 2);
  for (Eigen::Index i = 0; i < c.particles.rows(); ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) c.particles(i, j) = s.init_sigma * normal(rng);
  }
  c.target_samples.resize(static_cast<Eigen::Index>(s.targets), 2);
  for (Eigen::Index i = 0; i < c.target_samples.rows(); ++i) {
    const double cx = i % 2 == 0 ? s.mixture_offset : -s.mixture_offset;
    c.target_samples(i, 0) = cx + s.mixture_sigma * normal(rng);
    c.target_samples(i, 1) = s.mixture_sigma * normal(rng);
  }
  return c;
}

}  // namespace gdrift
