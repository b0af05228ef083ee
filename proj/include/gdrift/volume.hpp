#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace gdrift {

struct Dims3 {
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t count() const { return d * h * w; }
  bool fits_inside(const Dims3& outer) const { return d <= outer.d && h <= outer.h && w <= outer.w; }
  friend auto operator<=>(const Dims3&, const Dims3&) = default;
};

// Single-channel D x H x W voxel grid, x fastest.
class Volume {
 public:
  Volume() = default;
  explicit Volume(Dims3 dims, double fill = 0.0) : dims_(dims), data_(dims.count(), fill) {}
  Volume(Dims3 dims, std::vector<double> data);

  const Dims3& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t z, std::size_t y, std::size_t x) { return data_[(z * dims_.h + y) * dims_.w + x]; }
  const double& at(std::size_t z, std::size_t y, std::size_t x) const { return data_[(z * dims_.h + y) * dims_.w + x]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool all_finite() const;

  std::optional<std::array<double, 3>> voxel_size;

  friend bool operator==(const Volume& a, const Volume& b) { return a.dims_ == b.dims_ && a.data_ == b.data_; }

 private:
  Dims3 dims_;
  std::vector<double> data_;
};

// C x D x H x W feature map, x fastest.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, Dims3 dims, double fill = 0.0)
      : channels_(channels), dims_(dims), data_(channels * dims.count(), fill) {}

  static FeatureMap from_volume(const Volume& v);

  std::size_t channels() const { return channels_; }
  const Dims3& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) {
    return data_[((c * dims_.d + z) * dims_.h + y) * dims_.w + x];
  }
  const double& at(std::size_t c, std::size_t z, std::size_t y, std::size_t x) const {
    return data_[((c * dims_.d + z) * dims_.h + y) * dims_.w + x];
  }

  // Contiguous spatial block of channel c.
  std::span<double> channel(std::size_t c) { return {data_.data() + c * dims_.count(), dims_.count()}; }
  std::span<const double> channel(std::size_t c) const {
    return {data_.data() + c * dims_.count(), dims_.count()};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const FeatureMap& o) const { return channels_ == o.channels_ && dims_ == o.dims_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t channels_ = 0;
  Dims3 dims_;
  std::vector<double> data_;
};

}  // namespace gdrift
