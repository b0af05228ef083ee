#include "gdrift/volume.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gdrift {

Volume::Volume(Dims3 dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
  if (data_.size() != dims_.count()) throw std::invalid_argument("Volume: data size does not match dims");
}

bool Volume::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FeatureMap FeatureMap::from_volume(const Volume& v) {
  FeatureMap f(1, v.dims());
  std::copy(v.data().begin(), v.data().end(), f.data().begin());
  return f;
}

}  // namespace gdrift
