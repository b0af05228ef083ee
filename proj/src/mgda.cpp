#include "gdrift/mgda.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace gdrift {

bool SimplexWeights::feasible(double tol) const {
  if (alpha.size() == 0) return false;
  if ((alpha.array() < 0.0).any()) return false;
  return std::abs(alpha.sum() - 1.0) <= tol;
}

Matrix gram_matrix(std::span<const Vector> grads) {
  if (grads.empty()) throw std::invalid_argument("gram_matrix: no gradients");
  const auto k = static_cast<Eigen::Index>(grads.size());
  const Eigen::Index len = grads[0].size();
  for (const Vector& g : grads) {
    if (g.size() != len) throw std::invalid_argument("gram_matrix: gradient length mismatch");
  }
  Matrix h(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      h(i, j) = grads[static_cast<std::size_t>(i)].dot(grads[static_cast<std::size_t>(j)]);
      h(j, i) = h(i, j);
    }
  }
  return h;
}

SimplexWeights project_to_simplex(const Vector& v) {
  if (v.size() == 0) throw std::invalid_argument("project_to_simplex: empty vector");
  if (!v.allFinite()) throw std::invalid_argument("project_to_simplex: non-finite input");
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  SimplexWeights out;
  out.alpha = (v.array() - theta).max(0.0).matrix();
  return out;
}

SimplexWeights solve_simplex_qp(const Matrix& h, const QpOptions& opts) {
  if (h.rows() == 0 || h.rows() != h.cols()) throw std::invalid_argument("solve_simplex_qp: H must be square");
  if (!h.allFinite()) throw std::invalid_argument("solve_simplex_qp: non-finite H");
  const Eigen::Index k = h.rows();
  const double step = opts.step > 0.0 ? opts.step : 1.0 / (2.0 * h.norm() + 1e-12);

  Vector alpha = Vector::Constant(k, 1.0 / static_cast<double>(k));
  for (int it = 0; it < opts.max_iters; ++it) {
    Vector next = project_to_simplex(alpha - step * 2.0 * (h * alpha)).alpha;
    const double change = (next - alpha).norm();
    alpha = std::move(next);
    if (change < opts.tol) break;
  }
  // Geometric convergence toward a vertex never reaches it exactly; snap
  // coordinates that are within the stopping tolerance of zero.
  const double snap = 10.0 * opts.tol;
  if ((alpha.array() < snap).any() && (alpha.array() >= snap).any()) {
    alpha = (alpha.array() < snap).select(0.0, alpha);
    alpha /= alpha.sum();
  }
  return {alpha};
}

SimplexWeights two_objective_closed_form(const Vector& g1, const Vector& g2) {
  if (g1.size() != g2.size()) throw std::invalid_argument("two_objective_closed_form: length mismatch");
  if (g1.squaredNorm() == 0.0 && g2.squaredNorm() == 0.0) {
    throw std::invalid_argument("two_objective_closed_form: both gradients are zero");
  }
  const Vector diff = g1 - g2;
  const double denom = diff.squaredNorm();
  SimplexWeights out;
  out.alpha.resize(2);
  if (denom == 0.0) {
    out.alpha << 0.5, 0.5;
    return out;
  }
  const double a1 = std::clamp((g2 - g1).dot(g2) / denom, 0.0, 1.0);
  out.alpha << a1, 1.0 - a1;
  return out;
}

Coordination coordinate(const Vector& grad_fid, const Vector& grad_drift, double lambda, const QpOptions& opts) {
  if (grad_fid.size() != grad_drift.size()) throw std::invalid_argument("coordinate: gradient length mismatch");
  const Vector scaled = lambda * grad_drift;
  const Vector grads[2] = {grad_fid, scaled};
  Coordination out;
  out.weights = solve_simplex_qp(gram_matrix(grads), opts);
  out.combined = out.weights.alpha(0) * grad_fid + out.weights.alpha(1) * scaled;
  return out;
}

}  // namespace gdrift
