#pragma once

#include <array>
#include <vector>

#include "easal/labelgen.hpp"
#include "easal/tensor.hpp"

namespace easal {

inline constexpr double kFMeasureBeta2 = 0.3;
inline constexpr int kNumThresholds = 256;

struct PrPoint {
  double precision = 1.0;
  double recall = 1.0;
};

struct ImageMetrics {
  double mae = 0.0;
  std::array<PrPoint, kNumThresholds> pr{};
  std::array<double, kNumThresholds> f_beta{};
  bool degenerate_gt = false;  // ground truth has no salient pixels
};

struct MetricsReport {
  std::vector<ImageMetrics> per_image;
  double mean_mae = 0.0;
  double max_f = 0.0;           // max over thresholds of the image-averaged curve
  double mean_f = 0.0;          // mean over thresholds of the image-averaged curve
  double mean_best_f = 0.0;     // alternate convention: average of per-image best F
  std::array<PrPoint, kNumThresholds> mean_pr{};
  std::array<double, kNumThresholds> mean_f_curve{};
  int evaluated = 0;
  int skipped = 0;
};

double mae(const Tensor& saliency, const BinaryMap& gt);

// Threshold predicate: round(S*255) > t for t in [0,255]. Precision is 1
// when nothing is predicted; recall is 1 when the GT is empty.
ImageMetrics evaluate_image(const Tensor& saliency, const BinaryMap& gt);

double f_measure(double precision, double recall, double beta2 = kFMeasureBeta2);

// Averages F curves over images per threshold, then takes max/mean over
// thresholds for the dataset-level figures.
MetricsReport aggregate(std::vector<ImageMetrics> reports);

}  // namespace easal
