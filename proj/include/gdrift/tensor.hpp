#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace gdrift {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Dense N x M x C tensor, row-major (C fastest). Used for batched feature
// sets: N samples, M locations per sample, C channels per location.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n, std::size_t m, std::size_t c, double fill = 0.0);

  std::size_t n() const { return n_; }
  std::size_t m() const { return m_; }
  std::size_t c() const { return c_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * m_ + j) * c_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * m_ + j) * c_ + k];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Tensor3& other) const {
    return n_ == other.n_ && m_ == other.m_ && c_ == other.c_;
  }
  bool all_finite() const;

  // (N*M) x C view; row index is i * M + j.
  Eigen::Map<const Matrix> flat() const {
    return {data_.data(), static_cast<Eigen::Index>(n_ * m_), static_cast<Eigen::Index>(c_)};
  }
  Eigen::Map<Matrix> flat() {
    return {data_.data(), static_cast<Eigen::Index>(n_ * m_), static_cast<Eigen::Index>(c_)};
  }

  // N x C slice at location j.
  Matrix location(std::size_t j) const;
  void set_location(std::size_t j, const Matrix& values);

  double squared_norm() const;

  Tensor3& operator*=(double s);
  Tensor3& operator+=(const Tensor3& other);

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::size_t c_ = 0;
  std::vector<double> data_;
};

}  // namespace gdrift
