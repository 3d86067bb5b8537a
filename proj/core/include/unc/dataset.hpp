#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unc/tensor.hpp"

namespace unc {

// Labeled image set, NCHW, values in [0,1].
struct Dataset {
  std::size_t count = 0;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t class_count = 0;
  std::vector<double> images;  // count * channels * height * width
  std::vector<int> labels;     // in [0, class_count)
  std::string split_tag;
  std::string provenance;

  std::size_t image_size() const { return channels * height * width; }
  Shape image_shape() const { return {1, channels, height, width}; }

  Tensor image(std::size_t i) const;
  Tensor batch(const std::vector<std::size_t>& indices) const;  // [B,C,H,W]
  std::vector<int> batch_labels(const std::vector<std::size_t>& indices) const;

  // Contiguous [begin, end) slice with a new split tag.
  Dataset slice(std::size_t begin, std::size_t end, std::string tag) const;

  void validate() const;
};

// IDX ingestion (big-endian magic 0x00000803 for images, 0x00000801 for
// labels; unsigned bytes scaled by 1/255).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Exports a single-channel dataset back to the IDX pair; loading it again
// reproduces the quantized values exactly.
void save_idx(const Dataset& data, const std::string& images_path,
              const std::string& labels_path);

enum class SynthKind { gaussian_blobs, two_moons_images, colored_shapes, digits };

SynthKind synth_kind_from_string(const std::string& name);
std::string to_string(SynthKind kind);

// Deterministic synthetic sets, desk-scale substitutes for the real corpora:
//   gaussian_blobs    1x8x8,  K=4, linearly separable class means
//   two_moons_images  1x8x8,  K=2, rendered two-moons point bumps
//   colored_shapes    3x16x16, K=3, color-coded shapes (color transform prey)
//   digits            1x28x28, K=10, distorted glyph renderings
Dataset synth_dataset(SynthKind kind, std::size_t n, std::uint64_t seed);

}  // namespace unc
