#pragma once

#include "gdrift/volume.hpp"

#include <vector>

namespace gdrift {

// Power of the unnormalized DFT, |X(k)|^2 / count, binned by radial frequency
// sqrt(sum (k_i / n_i)^2) into `bands` equal-width bands over [0, 0.5].
// Corner frequencies beyond 0.5 fall into the last band, so the bands sum to
// sum(x^2) exactly in exact arithmetic.
std::vector<double> radial_power_spectrum(const Volume& residual, std::size_t bands);

}  // namespace gdrift
