#include "gdrift/drift_field.hpp"

#include "gdrift/log.hpp"

#include <cmath>
#include <stdexcept>

namespace gdrift {

Matrix local_drift(const Matrix& w_pos, const Matrix& w_neg, const Matrix& u_pos, const Matrix& u_neg) {
  if (w_pos.rows() != w_neg.rows() || w_pos.cols() != w_neg.cols()) {
    throw std::invalid_argument("local_drift: weight shape mismatch");
  }
  if (w_pos.cols() != u_pos.rows() || w_neg.cols() != u_neg.rows() || u_pos.cols() != u_neg.cols()) {
    throw std::invalid_argument("local_drift: feature shape mismatch");
  }
  return w_pos * u_pos - w_neg * u_neg;
}

Tensor3 aggregate_temperatures(const std::vector<Tensor3>& fields, std::size_t n, std::size_t m_d,
                               std::size_t c_d, double eps) {
  if (fields.empty()) throw std::invalid_argument("aggregate_temperatures: no fields");
  Tensor3 out(n, m_d, c_d);
  const double root = std::sqrt(static_cast<double>(n * m_d * c_d));
  for (const Tensor3& f : fields) {
    if (f.n() != n || f.m() != m_d || f.c() != c_d) {
      throw std::invalid_argument("aggregate_temperatures: field shape mismatch");
    }
    const double denom = std::sqrt(f.squared_norm()) / root + eps;
    auto dst = out.data();
    auto src = f.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i] / denom;
  }
  return out;
}

DriftField compute_drift_field(const FeatureTriplet& triplet, const DriftConfig& cfg) {
  cfg.validate();
  if (triplet.h.n() * triplet.h.m() == 0) throw std::invalid_argument("compute_drift_field: empty batch");
  triplet.validate();

  const std::size_t n = triplet.h.n();
  const std::size_t m_d = triplet.h.m();
  const std::size_t c_d = triplet.h.c();
  if (n == 1) {
    warn("compute_drift_field: batch of one sample; the only negative candidate is self-masked");
  }

  // Global scale from the flattened feature sets.
  const Matrix h_flat = triplet.h.flat();
  const Matrix d_pos = pairwise_distances(h_flat, triplet.u_pos.flat());
  const Matrix d_neg_raw = pairwise_distances(h_flat, triplet.u_neg.flat());
  const Matrix d_neg = mask_self_matches(d_neg_raw, cfg.mu_mask);
  const double s = global_scale(d_pos, d_neg, c_d, cfg.include_mask_in_scale, cfg.mu_mask, cfg.eps);

  DriftField field;
  field.family = triplet.family;
  field.scale = s;

  // Every feature vector identical: the field is zero by symmetry. Computing
  // it would only normalize rounding noise up to unit RMS.
  if (d_pos.maxCoeff() == 0.0 && d_neg_raw.maxCoeff() == 0.0) {
    field.v = Tensor3(n, m_d, c_d);
    field.temperature_norms.assign(cfg.temperatures.size(), 0.0);
    return field;
  }

  const FeatureTriplet norm = normalize_triplet(triplet, s);

  std::vector<Tensor3> per_temperature;
  per_temperature.reserve(cfg.temperatures.size());
  const double root_c = std::sqrt(static_cast<double>(c_d));
  for (double tau : cfg.temperatures) {
    const double t = tau * root_c;
    Tensor3 v_tau(n, m_d, c_d);
    for (std::size_t m = 0; m < m_d; ++m) {
      const Matrix h = norm.h.location(m);
      const Matrix u_pos = norm.u_pos.location(m);
      const Matrix u_neg = norm.u_neg.location(m);
      const Matrix z_pos = -pairwise_distances(h, u_pos) / t;
      const Matrix z_neg = -mask_self_matches(pairwise_distances(h, u_neg), cfg.mu_mask) / t;
      const Matrix a = joint_affinity(z_pos, z_neg);
      const auto nn = static_cast<Eigen::Index>(n);
      const PushPullWeights w = push_pull_weights(a.leftCols(nn), a.rightCols(nn));
      v_tau.set_location(m, local_drift(w.w_pos, w.w_neg, u_pos, u_neg));
    }
    field.temperature_norms.push_back(std::sqrt(v_tau.squared_norm()));
    per_temperature.push_back(std::move(v_tau));
  }
  if (cfg.normalize_temperatures) {
    field.v = aggregate_temperatures(per_temperature, n, m_d, c_d, cfg.eps);
  } else {
    field.v = Tensor3(n, m_d, c_d);
    for (const Tensor3& v_tau : per_temperature) field.v += v_tau;
  }
  return field;
}

Vector continuous_drift_oracle(const Vector& h, const Matrix& positives, const Matrix& negatives,
                               double eps_kernel) {
  if (!(eps_kernel > 0.0)) throw std::invalid_argument("continuous_drift_oracle: eps_kernel must be positive");
  if (positives.rows() < 1 || negatives.rows() < 1) {
    throw std::invalid_argument("continuous_drift_oracle: need at least one positive and one negative");
  }
  if (positives.cols() != h.size() || negatives.cols() != h.size()) {
    throw std::invalid_argument("continuous_drift_oracle: dimension mismatch");
  }
  // Kernel weights are shifted by the nearest sample's logit; the shift
  // cancels in the normalized mean.
  auto mean_displacement = [&](const Matrix& samples) {
    Vector logits(samples.rows());
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      logits(i) = -(samples.row(i).transpose() - h).norm() / eps_kernel;
    }
    const double mx = logits.maxCoeff();
    Vector num = Vector::Zero(h.size());
    double den = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      const double k = std::exp(logits(i) - mx);
      num += k * (samples.row(i).transpose() - h);
      den += k;
    }
    return Vector(num / den);
  };
  return mean_displacement(positives) - mean_displacement(negatives);
}

DriftLossResult drift_loss(const Tensor3& h_norm, const DriftField& field) {
  if (!h_norm.same_shape(field.v)) throw std::invalid_argument("drift_loss: shape mismatch");
  DriftLossResult r;
  r.target = h_norm;
  r.target += field.v;
  r.grad_h = field.v;
  r.grad_h *= -1.0;
  r.loss = 0.5 * field.v.squared_norm();
  return r;
}

}  // namespace gdrift
