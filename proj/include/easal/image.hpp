#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "easal/tensor.hpp"

namespace easal {

// 8-bit image I/O over binary PNM (P5 grayscale, P6 color). Lossless and
// byte-deterministic; lossy formats are rejected by the magic check.

struct ImageMeta {
  std::vector<std::string> comments;  // "# ..." header lines, without the '#'
};

// Loads a color image as 3xHxW in [0,1] (grayscale files are replicated
// across channels).
Tensor read_image(const std::filesystem::path& path, ImageMeta* meta = nullptr);
// Loads a grayscale image as 1xHxW in [0,1]; color files are rejected.
Tensor read_gray(const std::filesystem::path& path, ImageMeta* meta = nullptr);

// Values are clamped to [0,1] and quantized with round(v*255). Writes are
// atomic (temp file + rename).
void write_gray(const std::filesystem::path& path, const Tensor& map, const ImageMeta& meta = {});
void write_color(const std::filesystem::path& path, const Tensor& image, const ImageMeta& meta = {});

// Atomic text-file write (temp file + rename), shared by the CSV writers.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// sRGB in [0,1] -> CIE-Lab under the D65 white point.
std::array<double, 3> srgb_to_lab(double r, double g, double b);
std::array<double, 3> lab_to_srgb(double L, double a, double b);

}  // namespace easal
