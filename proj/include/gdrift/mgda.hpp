#pragma once

#include "gdrift/tensor.hpp"

#include <span>
#include <vector>

namespace gdrift {

struct SimplexWeights {
  Vector alpha;

  // Nonnegative entries summing to one within `tol`.
  bool feasible(double tol = 1e-9) const;
};

struct QpOptions {
  int max_iters = 500;
  // Nonpositive means 1 / (2 * ||H||_F + eps).
  double step = 0.0;
  double tol = 1e-10;
};

// Gram matrix of flat gradients: h(i, j) = <g_i, g_j>.
Matrix gram_matrix(std::span<const Vector> grads);

// Euclidean projection onto the probability simplex (sort and threshold).
SimplexWeights project_to_simplex(const Vector& v);

// argmin alpha^T H alpha over the simplex by projected gradient descent
// started from the uniform point.
SimplexWeights solve_simplex_qp(const Matrix& h, const QpOptions& opts = {});

// Closed-form minimizer of the two-objective case.
SimplexWeights two_objective_closed_form(const Vector& g1, const Vector& g2);

struct Coordination {
  SimplexWeights weights;
  Vector combined;
};

// Scales grad_drift by lambda, solves the two-objective QP on the output-space
// gradients and returns alpha_1 * grad_fid + alpha_2 * lambda * grad_drift.
Coordination coordinate(const Vector& grad_fid, const Vector& grad_drift, double lambda,
                        const QpOptions& opts = {});

}  // namespace gdrift
