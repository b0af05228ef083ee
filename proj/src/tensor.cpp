#include "gdrift/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace gdrift {

Tensor3::Tensor3(std::size_t n, std::size_t m, std::size_t c, double fill)
    : n_(n), m_(m), c_(c), data_(n * m * c, fill) {}

bool Tensor3::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix Tensor3::location(std::size_t j) const {
  if (j >= m_) throw std::out_of_range("Tensor3::location: index out of range");
  Matrix out(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(c_));
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = 0; k < c_; ++k) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = (*this)(i, j, k);
    }
  }
  return out;
}

void Tensor3::set_location(std::size_t j, const Matrix& values) {
  if (j >= m_) throw std::out_of_range("Tensor3::set_location: index out of range");
  if (static_cast<std::size_t>(values.rows()) != n_ || static_cast<std::size_t>(values.cols()) != c_) {
    throw std::invalid_argument("Tensor3::set_location: shape mismatch");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = 0; k < c_; ++k) {
      (*this)(i, j, k) = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
  }
}

double Tensor3::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

Tensor3& Tensor3::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
  if (!same_shape(other)) throw std::invalid_argument("Tensor3::operator+=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

}  // namespace gdrift
