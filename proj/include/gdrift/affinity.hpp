#pragma once

#include "gdrift/family.hpp"
#include "gdrift/tensor.hpp"

#include <utility>
#include <vector>

namespace gdrift {

// Generated / positive-target / negative-generated features of one family.
struct FeatureTriplet {
  Family family = Family::Local;
  Tensor3 h;
  Tensor3 u_pos;
  Tensor3 u_neg;

  // Throws std::invalid_argument on empty, mismatched, or non-finite tensors.
  void validate() const;
};

struct DriftConfig {
  std::vector<double> temperatures{0.004, 0.01, 0.04};
  // Added to the diagonal of negative distance matrices so a query never
  // matches its own negative slot.
  double mu_mask = 1e4;
  double eps = 1e-8;
  bool include_mask_in_scale = true;
  // Divide each per-temperature field by its RMS before summing. When false
  // the raw per-temperature fields are summed, which keeps the magnitude
  // information the equilibrium property is stated in.
  bool normalize_temperatures = true;
  // Drift objective weight applied before MGDA.
  double lambda_drift = 3e-4;

  void validate() const;
};

// Euclidean distance between every row of `a` and every row of `b`.
Matrix pairwise_distances(const Matrix& a, const Matrix& b);

// d + mu_mask * I.
Matrix mask_self_matches(const Matrix& d, double mu_mask);

// Mean over the union of entries of d_pos and d_neg_masked, divided by
// sqrt(c_d). With include_mask == false the mask is removed from the diagonal
// of d_neg_masked before averaging. A zero mean clamps to eps.
double global_scale(const Matrix& d_pos, const Matrix& d_neg_masked, std::size_t c_d,
                    bool include_mask, double mu_mask, double eps = 1e-8);

FeatureTriplet normalize_triplet(const FeatureTriplet& t, double s);

// Softmax along each row / each column, both max-shifted.
Matrix softmax_rows(const Matrix& z);
Matrix softmax_cols(const Matrix& z);

// Bidirectional softmax affinity over the concatenated N x 2N logits
// [z_pos | z_neg]: sqrt(softmax over candidates * softmax over queries).
Matrix joint_affinity(const Matrix& z_pos, const Matrix& z_neg);

struct PushPullWeights {
  Matrix w_pos;
  Matrix w_neg;
};

// Cross push-pull weights: each positive affinity is scaled by the query's
// total negative response and vice versa.
PushPullWeights push_pull_weights(const Matrix& a_pos, const Matrix& a_neg);

}  // namespace gdrift
