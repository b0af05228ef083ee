#include "gdrift/affinity.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gdrift {

void FeatureTriplet::validate() const {
  if (h.empty()) throw std::invalid_argument("FeatureTriplet: empty generated tensor");
  if (!h.same_shape(u_pos) || !h.same_shape(u_neg)) {
    throw std::invalid_argument("FeatureTriplet: h, u_pos and u_neg must share a shape");
  }
  if (!h.all_finite() || !u_pos.all_finite() || !u_neg.all_finite()) {
    throw std::invalid_argument("FeatureTriplet: non-finite feature entries");
  }
}

void DriftConfig::validate() const {
  if (temperatures.empty()) throw std::invalid_argument("DriftConfig: no temperatures");
  for (double t : temperatures) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw std::invalid_argument("DriftConfig: temperatures must be positive");
    }
  }
  if (!(eps > 0.0)) throw std::invalid_argument("DriftConfig: eps must be positive");
  if (!(mu_mask >= 0.0)) throw std::invalid_argument("DriftConfig: mu_mask must be nonnegative");
  if (!(lambda_drift >= 0.0)) throw std::invalid_argument("DriftConfig: lambda must be nonnegative");
}

Matrix pairwise_distances(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("pairwise_distances: channel mismatch (" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.cols()) + ")");
  }
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  const Eigen::Index c = a.cols();
  Matrix out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* ai = a.data() + i * c;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double* bj = b.data() + j * c;
      double s = 0.0;
      for (Eigen::Index k = 0; k < c; ++k) {
        const double d = ai[k] - bj[k];
        s += d * d;
      }
      out(i, j) = std::sqrt(s);
    }
  }
  return out;
}

Matrix mask_self_matches(const Matrix& d, double mu_mask) {
  if (d.rows() != d.cols()) throw std::invalid_argument("mask_self_matches: matrix is not square");
  Matrix out = d;
  out.diagonal().array() += mu_mask;
  return out;
}

double global_scale(const Matrix& d_pos, const Matrix& d_neg_masked, std::size_t c_d,
                    bool include_mask, double mu_mask, double eps) {
  if (d_pos.size() == 0 || d_neg_masked.size() == 0) {
    throw std::invalid_argument("global_scale: empty distance matrix");
  }
  if (c_d == 0) throw std::invalid_argument("global_scale: zero channel dimension");
  double total = d_pos.sum() + d_neg_masked.sum();
  if (!include_mask) {
    total -= mu_mask * static_cast<double>(std::min(d_neg_masked.rows(), d_neg_masked.cols()));
  }
  const double count = static_cast<double>(d_pos.size() + d_neg_masked.size());
  const double s = (total / count) / std::sqrt(static_cast<double>(c_d));
  return s > 0.0 ? s : eps;
}

FeatureTriplet normalize_triplet(const FeatureTriplet& t, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("normalize_triplet: scale must be positive");
  FeatureTriplet out = t;
  for (double& v : out.h.data()) v /= s;
  for (double& v : out.u_pos.data()) v /= s;
  for (double& v : out.u_neg.data()) v /= s;
  return out;
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      out(i, j) = std::exp(z(i, j) - mx);
      sum += out(i, j);
    }
    out.row(i) /= sum;
  }
  return out;
}

Matrix softmax_cols(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double mx = z.col(j).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      out(i, j) = std::exp(z(i, j) - mx);
      sum += out(i, j);
    }
    out.col(j) /= sum;
  }
  return out;
}

Matrix joint_affinity(const Matrix& z_pos, const Matrix& z_neg) {
  if (z_pos.rows() != z_neg.rows() || z_pos.cols() != z_neg.cols() || z_pos.rows() != z_pos.cols()) {
    throw std::invalid_argument("joint_affinity: z_pos and z_neg must both be N x N");
  }
  const Eigen::Index n = z_pos.rows();
  Matrix z(n, 2 * n);
  z.leftCols(n) = z_pos;
  z.rightCols(n) = z_neg;
  return (softmax_rows(z).array() * softmax_cols(z).array()).sqrt().matrix();
}

PushPullWeights push_pull_weights(const Matrix& a_pos, const Matrix& a_neg) {
  if (a_pos.rows() != a_neg.rows() || a_pos.cols() != a_neg.cols()) {
    throw std::invalid_argument("push_pull_weights: shape mismatch");
  }
  if ((a_pos.array() < 0.0).any() || (a_neg.array() < 0.0).any()) {
    throw std::invalid_argument("push_pull_weights: negative affinity");
  }
  const Vector s_pos = a_pos.rowwise().sum();
  const Vector s_neg = a_neg.rowwise().sum();
  PushPullWeights w;
  w.w_pos = s_neg.asDiagonal() * a_pos;
  w.w_neg = s_pos.asDiagonal() * a_neg;
  return w;
}

}  // namespace gdrift
