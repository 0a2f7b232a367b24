#include "easal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace easal {

double mae(const Tensor& saliency, const BinaryMap& gt) {
  if (saliency.rank() != 3 || saliency.dim(0) != 1 || saliency.dim(1) != gt.height || saliency.dim(2) != gt.width)
    throw std::invalid_argument("mae: saliency map resolution does not match ground truth " +
                                std::to_string(gt.height) + "x" + std::to_string(gt.width));
  double acc = 0.0;
  for (std::size_t i = 0; i < saliency.data.size(); ++i) acc += std::abs(saliency.data[i] - gt.values[i]);
  return acc / static_cast<double>(saliency.data.size());
}

double f_measure(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + beta2) * precision * recall / denom;
}

ImageMetrics evaluate_image(const Tensor& saliency, const BinaryMap& gt) {
  ImageMetrics m;
  m.mae = mae(saliency, gt);

  // Histogram of quantized saliency levels split by GT class, then a single
  // suffix sweep gives TP/FP at every threshold.
  std::array<long, 256> pos_hist{}, neg_hist{};
  long gt_pos = 0;
  for (std::size_t i = 0; i < saliency.data.size(); ++i) {
    const int q = static_cast<int>(std::lround(std::clamp(saliency.data[i], 0.0, 1.0) * 255.0));
    if (gt.values[i]) {
      pos_hist[q] += 1;
      gt_pos += 1;
    } else {
      neg_hist[q] += 1;
    }
  }
  m.degenerate_gt = gt_pos == 0;

  long tp = 0, fp = 0;  // counts with level > t, accumulated from t=255 down
  for (int t = 255; t >= 0; --t) {
    if (t < 255) {
      tp += pos_hist[t + 1];
      fp += neg_hist[t + 1];
    }
    PrPoint& pt = m.pr[t];
    pt.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    pt.recall = gt_pos == 0 ? 1.0 : static_cast<double>(tp) / gt_pos;
    m.f_beta[t] = f_measure(pt.precision, pt.recall);
  }
  return m;
}

MetricsReport aggregate(std::vector<ImageMetrics> reports) {
  MetricsReport r;
  r.per_image = std::move(reports);
  r.evaluated = static_cast<int>(r.per_image.size());
  if (r.per_image.empty()) return r;

  r.mean_pr.fill({0.0, 0.0});
  const double n = static_cast<double>(r.per_image.size());
  for (const ImageMetrics& m : r.per_image) {
    r.mean_mae += m.mae / n;
    r.mean_best_f += *std::max_element(m.f_beta.begin(), m.f_beta.end()) / n;
    for (int t = 0; t < kNumThresholds; ++t) {
      r.mean_pr[t].precision += m.pr[t].precision / n;
      r.mean_pr[t].recall += m.pr[t].recall / n;
      r.mean_f_curve[t] += m.f_beta[t] / n;
    }
  }
  r.max_f = *std::max_element(r.mean_f_curve.begin(), r.mean_f_curve.end());
  double mean = 0.0;
  for (double f : r.mean_f_curve) mean += f;
  r.mean_f = mean / kNumThresholds;
  return r;
}

}  // namespace easal
