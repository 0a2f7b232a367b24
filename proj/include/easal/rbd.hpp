#pragma once

#include <array>
#include <vector>

#include "easal/tensor.hpp"

namespace easal {

struct RbdParams {
  int k_regions = 200;
  double compactness = 20.0;
  double sigma_clr = 10.0;     // CIE-Lab units
  double delta_bndcon = 1.0;
  double sigma_spa = 0.25;     // normalized image coordinates
};

struct Region {
  std::array<double, 3> mean_lab{};   // L, a, b of the region mean
  std::array<double, 2> centroid{};   // (x, y) in [0,1]
  int pixel_count = 0;
  int boundary_contact_count = 0;     // pixels on the image border
};

struct SuperpixelGraph {
  int height = 0, width = 0;
  std::vector<int> labels;            // per-pixel region id, dense 0..N-1
  std::vector<Region> regions;
  // adjacency[p] -> list of (neighbor id, d_app); symmetric.
  std::vector<std::vector<std::pair<int, double>>> adjacency;

  int region_count() const { return static_cast<int>(regions.size()); }
  int label_at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct BndConScores {
  std::vector<double> len_bnd;
  std::vector<double> area;
  std::vector<double> bndcon;   // len_bnd / sqrt(area)
};

SuperpixelGraph slic_superpixels(const Tensor& image, int k_regions, double compactness);

// Soft geodesic boundary-connectivity: shortest paths over the region
// adjacency graph with edge cost d_app, Gaussian-accumulated with sigma_clr.
BndConScores geodesic_background_scores(const SuperpixelGraph& graph, double sigma_clr);

std::vector<double> background_probability(const BndConScores& scores, double delta_bndcon);

std::vector<double> weighted_contrast(const SuperpixelGraph& graph, const std::vector<double>& omega_bg,
                                      double sigma_spa);

// Full pipeline: slic -> geodesic scores -> omega_bg -> wCtr, min-max
// normalized to [0,1] and broadcast back to pixels. Constant wCtr maps to
// all zeros.
Tensor rbd_saliency(const Tensor& image, const RbdParams& params = {});

// CIE-Lab Euclidean distance between region mean colors.
double region_color_distance(const Region& a, const Region& b);

}  // namespace easal
