#pragma once

#include <span>
#include <string>

#include "unc/tensor.hpp"

namespace unc {

// Binary (P5) PGM, values in [0,1] quantized to 0..255.
void write_pgm(const std::string& path, std::size_t height, std::size_t width,
               std::span<const double> values);

// Binary (P6) PPM from CHW data (3 planes of height*width).
void write_ppm(const std::string& path, std::size_t height, std::size_t width,
               std::span<const double> chw_values);

// One image (or mask plane) per channel: single-channel tensors go to .pgm,
// 3-channel tensors to .ppm; other channel counts write one plane per file.
void export_image(const Tensor& image_1chw, const std::string& path_stem);

}  // namespace unc
