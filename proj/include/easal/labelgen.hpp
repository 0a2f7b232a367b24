#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "easal/tensor.hpp"

namespace easal {

// Per-pixel label: 0 background, 1 salient edge, 2 salient object.
struct TriLabelMap {
  int height = 0, width = 0;
  std::vector<std::uint8_t> labels;
  std::array<std::size_t, 3> counts{};  // |Y_b|, |Y_e|, |Y_s|

  std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t total() const { return labels.size(); }
};

struct BinaryMap {
  int height = 0, width = 0;
  std::vector<std::uint8_t> values;  // 0 or 1

  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  void set(int y, int x, std::uint8_t v) { values[static_cast<std::size_t>(y) * width + x] = v; }
};

// Converts a 1xHxW tensor to a binary map; rejects values other than 0/1.
BinaryMap to_binary_mask(const Tensor& gt);

// Canny on a binary mask: one-pixel zero padding, Gaussian blur sigma=1.0,
// Sobel gradients, non-maximum suppression, hysteresis at (0.1, 0.3) of the
// max gradient magnitude.
BinaryMap canny_edges(const BinaryMap& gt);

BinaryMap dilate_3x3(const BinaryMap& edges);

// Assignment order: all background, thickened edge -> 1, then remaining object
// pixels -> 2 (edge wins on overlap).
TriLabelMap three_category_labels(const BinaryMap& gt);

// Visual encoding: labels 0/1/2 <-> gray values 0/128/255.
Tensor trilabel_to_gray(const TriLabelMap& map);
TriLabelMap trilabel_from_gray(const Tensor& gray);

}  // namespace easal
