#include "easal/labelgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace easal {

BinaryMap to_binary_mask(const Tensor& gt) {
  if (gt.rank() != 3 || gt.dim(0) != 1) throw std::invalid_argument("mask: expected 1xHxW tensor");
  BinaryMap m;
  m.height = gt.dim(1);
  m.width = gt.dim(2);
  m.values.resize(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double v = gt.data[i];
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("mask: non-binary value " + std::to_string(v) + " at index " + std::to_string(i));
    m.values[i] = v == 1.0 ? 1 : 0;
  }
  return m;
}

namespace {

constexpr double kHystLow = 0.1;   // of max gradient magnitude
constexpr double kHystHigh = 0.3;

std::vector<double> gaussian_blur_padded(const BinaryMap& gt, int pad, int* ph, int* pw) {
  // Zero padding so border-touching objects still produce edges.
  const int h = gt.height + 2 * pad, w = gt.width + 2 * pad;
  std::vector<double> img(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x)
      img[static_cast<std::size_t>(y + pad) * w + (x + pad)] = gt.at(y, x);

  const double sigma = 1.0;
  const int radius = 3;
  std::vector<double> kern(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kern[i + radius] = std::exp(-i * i / (2.0 * sigma * sigma));
    sum += kern[i + radius];
  }
  for (double& v : kern) v /= sum;

  std::vector<double> tmp(img.size(), 0.0), out(img.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += img[static_cast<std::size_t>(y) * w + xx] * kern[i + radius];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += tmp[static_cast<std::size_t>(yy) * w + x] * kern[i + radius];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  *ph = h;
  *pw = w;
  return out;
}

}  // namespace

BinaryMap canny_edges(const BinaryMap& gt) {
  const int pad = 1;
  int h = 0, w = 0;
  const std::vector<double> img = gaussian_blur_padded(gt, pad, &h, &w);

  std::vector<double> mag(img.size(), 0.0), dir(img.size(), 0.0);
  double max_mag = 0.0;
  auto px = [&](int y, int x) {
    return img[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1) -
                        px(y - 1, x - 1) - 2 * px(y, x - 1) - px(y + 1, x - 1);
      const double gy = px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1) -
                        px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1);
      const double m = std::hypot(gx, gy);
      mag[static_cast<std::size_t>(y) * w + x] = m;
      dir[static_cast<std::size_t>(y) * w + x] = std::atan2(gy, gx);
      max_mag = std::max(max_mag, m);
    }
  }

  BinaryMap edges;
  edges.height = gt.height;
  edges.width = gt.width;
  edges.values.assign(static_cast<std::size_t>(gt.height) * gt.width, 0);
  if (max_mag == 0.0) return edges;  // flat mask, no edges

  // Non-maximum suppression with the gradient direction quantized to
  // {0, 45, 90, 135} degrees.
  std::vector<std::uint8_t> nms(img.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      const double m = mag[idx];
      if (m == 0.0) continue;
      double angle = dir[idx] * 180.0 / M_PI;
      if (angle < 0) angle += 180.0;
      int dy = 0, dx = 1;
      if (angle >= 22.5 && angle < 67.5) {
        dy = 1;
        dx = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        dy = 1;
        dx = 0;
      } else if (angle >= 112.5 && angle < 157.5) {
        dy = 1;
        dx = -1;
      }
      auto mag_at = [&](int yy, int xx) {
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
        return mag[static_cast<std::size_t>(yy) * w + xx];
      };
      if (m >= mag_at(y + dy, x + dx) && m >= mag_at(y - dy, x - dx)) nms[idx] = 1;
    }
  }

  const double lo = kHystLow * max_mag, hi = kHystHigh * max_mag;
  std::vector<std::uint8_t> state(img.size(), 0);  // 0 none, 1 weak, 2 strong
  std::vector<int> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!nms[idx]) continue;
      if (mag[idx] >= hi) {
        state[idx] = 2;
        stack.push_back(static_cast<int>(idx));
      } else if (mag[idx] >= lo) {
        state[idx] = 1;
      }
    }
  }
  while (!stack.empty()) {
    const int idx = stack.back();
    stack.pop_back();
    const int y = idx / w, x = idx % w;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
        if (state[nidx] == 1) {
          state[nidx] = 2;
          stack.push_back(static_cast<int>(nidx));
        }
      }
    }
  }

  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x)
      if (state[static_cast<std::size_t>(y + pad) * w + (x + pad)] == 2) edges.set(y, x, 1);
  return edges;
}

BinaryMap dilate_3x3(const BinaryMap& edges) {
  BinaryMap out = edges;
  for (int y = 0; y < edges.height; ++y) {
    for (int x = 0; x < edges.width; ++x) {
      if (!edges.at(y, x)) continue;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= edges.height || nx < 0 || nx >= edges.width) continue;
          out.set(ny, nx, 1);
        }
      }
    }
  }
  return out;
}

TriLabelMap three_category_labels(const BinaryMap& gt) {
  const BinaryMap thick = dilate_3x3(canny_edges(gt));
  TriLabelMap map;
  map.height = gt.height;
  map.width = gt.width;
  map.labels.assign(gt.values.size(), 0);
  for (std::size_t i = 0; i < gt.values.size(); ++i) {
    if (thick.values[i])
      map.labels[i] = 1;
    else if (gt.values[i])
      map.labels[i] = 2;
  }
  map.counts = {0, 0, 0};
  for (std::uint8_t l : map.labels) map.counts[l] += 1;
  return map;
}

Tensor trilabel_to_gray(const TriLabelMap& map) {
  Tensor t({1, map.height, map.width});
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    static constexpr double kLevels[3] = {0.0, 128.0 / 255.0, 1.0};
    t.data[i] = kLevels[map.labels[i]];
  }
  return t;
}

TriLabelMap trilabel_from_gray(const Tensor& gray) {
  if (gray.rank() != 3 || gray.dim(0) != 1) throw std::invalid_argument("trilabel: expected 1xHxW tensor");
  TriLabelMap map;
  map.height = gray.dim(1);
  map.width = gray.dim(2);
  map.labels.resize(gray.size());
  map.counts = {0, 0, 0};
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const long q = std::lround(gray.data[i] * 255.0);
    std::uint8_t l;
    if (q == 0)
      l = 0;
    else if (q == 128)
      l = 1;
    else if (q == 255)
      l = 2;
    else
      throw std::invalid_argument("trilabel: unexpected gray level " + std::to_string(q));
    map.labels[i] = l;
    map.counts[l] += 1;
  }
  return map;
}

}  // namespace easal
