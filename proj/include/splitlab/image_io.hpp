#pragma once

#include <string>
#include <vector>

#include "splitlab/tensor.hpp"

namespace splitlab::cli {

// Lossless binary PPM (P6), 8-bit quantization by round(v * 255).
// Out-of-range values are clamped; returns true when clamping happened.
bool write_ppm(const Tensor& image, const std::string& path);

Tensor read_ppm(const std::string& path);

// Dumps each tensor as <prefix><index>.ppm; returns the paths.
std::vector<std::string> dump_images(const std::vector<Tensor>& images, const std::string& prefix);

}  // namespace splitlab::cli
