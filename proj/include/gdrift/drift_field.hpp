#pragma once

#include "gdrift/affinity.hpp"

#include <vector>

namespace gdrift {

// Empirical drift field of one descriptor family, expressed over the
// scale-normalized generated features.
struct DriftField {
  Family family = Family::Local;
  Tensor3 v;
  // Global distance scale S used to normalize the features. Detached.
  double scale = 1.0;
  // Frobenius norm of each per-temperature field before aggregation.
  std::vector<double> temperature_norms;
};

struct DriftLossResult {
  double loss = 0.0;
  Tensor3 grad_h;
  Tensor3 target;
};

// V = w_pos * u_pos - w_neg * u_neg.
Matrix local_drift(const Matrix& w_pos, const Matrix& w_neg, const Matrix& u_pos, const Matrix& u_neg);

// Sum over temperatures of V_tau / (||V_tau||_F / sqrt(n * m_d * c_d) + eps).
Tensor3 aggregate_temperatures(const std::vector<Tensor3>& fields, std::size_t n, std::size_t m_d,
                               std::size_t c_d, double eps);

// Empirical drifting field: global flattened distances, self-mask, global
// scale, normalization, then per-temperature, per-location bidirectional
// affinities and cross push-pull drift, aggregated across temperatures.
DriftField compute_drift_field(const FeatureTriplet& triplet, const DriftConfig& cfg);

// Kernel-weighted mean displacement toward the positives minus the same
// toward the negatives, with a Laplacian kernel exp(-||x - y|| / eps_kernel).
Vector continuous_drift_oracle(const Vector& h, const Matrix& positives, const Matrix& negatives,
                               double eps_kernel);

// Stop-gradient regression onto h_norm + v. The target is detached, so the
// residual h_norm - target reduces to -v and the loss to 0.5 * ||v||^2.
DriftLossResult drift_loss(const Tensor3& h_norm, const DriftField& field);

}  // namespace gdrift
