#include "easal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace easal {

namespace {

std::size_t shape_product(const std::vector<int>& s) {
  std::size_t n = 1;
  for (int e : s) {
    if (e <= 0) throw std::invalid_argument("tensor extent must be positive, got " + std::to_string(e));
    n *= static_cast<std::size_t>(e);
  }
  return n;
}

void require_rank3(const Tensor& t, const char* what) {
  if (t.rank() != 3)
    throw std::invalid_argument(std::string(what) + ": expected rank-3 (c,h,w) tensor, got rank " +
                                std::to_string(t.rank()));
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), data(shape_product(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)), data(shape_product(shape), fill) {}

double& Tensor::at(int c, int y, int x) {
  return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
}

double Tensor::at(int c, int y, int x) const {
  return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

int ConvSpec::out_extent(int in_extent) const {
  return (in_extent + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1;
}

void ConvSpec::validate() const {
  if (in_channels < 1) throw std::invalid_argument("conv: in_channels must be >= 1");
  if (out_channels < 1) throw std::invalid_argument("conv: out_channels must be >= 1");
  if (kernel < 1 || kernel % 2 == 0)
    throw std::invalid_argument("conv: kernel extent must be odd and positive, got " + std::to_string(kernel));
  if (stride < 1) throw std::invalid_argument("conv: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv: padding must be >= 0");
  if (dilation < 1) throw std::invalid_argument("conv: dilation must be >= 1");
}

namespace {

void check_conv_args(const Tensor& input, const Tensor& weights, const Tensor* bias, const ConvSpec& spec) {
  spec.validate();
  require_rank3(input, "conv");
  if (input.dim(0) != spec.in_channels)
    throw std::invalid_argument("conv: input channel count " + std::to_string(input.dim(0)) +
                                " does not match spec in_channels " + std::to_string(spec.in_channels));
  if (weights.rank() != 4 || weights.dim(0) != spec.out_channels || weights.dim(1) != spec.in_channels ||
      weights.dim(2) != spec.kernel || weights.dim(3) != spec.kernel)
    throw std::invalid_argument("conv: weights must be shaped out x in x k x k = " +
                                std::to_string(spec.out_channels) + "x" + std::to_string(spec.in_channels) + "x" +
                                std::to_string(spec.kernel) + "x" + std::to_string(spec.kernel));
  if (bias && (bias->rank() != 1 || bias->dim(0) != spec.out_channels))
    throw std::invalid_argument("conv: bias length must equal out_channels " + std::to_string(spec.out_channels));
  if (spec.out_extent(input.dim(1)) < 1)
    throw std::invalid_argument("conv: output height would be < 1 for input height " + std::to_string(input.dim(1)));
  if (spec.out_extent(input.dim(2)) < 1)
    throw std::invalid_argument("conv: output width would be < 1 for input width " + std::to_string(input.dim(2)));
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvSpec& spec) {
  check_conv_args(input, weights, &bias, spec);
  const int in_h = input.dim(1), in_w = input.dim(2);
  const int out_h = spec.out_extent(in_h), out_w = spec.out_extent(in_w);
  const int k = spec.kernel, l = spec.dilation, s = spec.stride, p = spec.padding;
  Tensor out({spec.out_channels, out_h, out_w});
  for (int oc = 0; oc < spec.out_channels; ++oc) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        double acc = bias.data[oc];
        for (int ic = 0; ic < spec.in_channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s - p + ky * l;
            if (iy < 0 || iy >= in_h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s - p + kx * l;
              if (ix < 0 || ix >= in_w) continue;
              acc += input.at(ic, iy, ix) * weights.data[((static_cast<std::size_t>(oc) * spec.in_channels + ic) * k + ky) * k + kx];
            }
          }
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights, const ConvSpec& spec, const Tensor& grad_out) {
  check_conv_args(input, weights, nullptr, spec);
  const int in_h = input.dim(1), in_w = input.dim(2);
  const int out_h = spec.out_extent(in_h), out_w = spec.out_extent(in_w);
  if (grad_out.rank() != 3 || grad_out.dim(0) != spec.out_channels || grad_out.dim(1) != out_h ||
      grad_out.dim(2) != out_w)
    throw std::invalid_argument("conv backward: grad_out shape does not match forward output " +
                                std::to_string(spec.out_channels) + "x" + std::to_string(out_h) + "x" +
                                std::to_string(out_w));
  const int k = spec.kernel, l = spec.dilation, s = spec.stride, p = spec.padding;

  ConvGrads g;
  g.grad_input = Tensor(input.shape);
  g.grad_weights = Tensor(weights.shape);
  g.grad_bias = Tensor({spec.out_channels});

  for (int oc = 0; oc < spec.out_channels; ++oc) {
    for (int oy = 0; oy < out_h; ++oy) {
      for (int ox = 0; ox < out_w; ++ox) {
        const double go = grad_out.at(oc, oy, ox);
        if (go == 0.0) continue;
        g.grad_bias.data[oc] += go;
        for (int ic = 0; ic < spec.in_channels; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s - p + ky * l;
            if (iy < 0 || iy >= in_h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s - p + kx * l;
              if (ix < 0 || ix >= in_w) continue;
              const std::size_t widx = ((static_cast<std::size_t>(oc) * spec.in_channels + ic) * k + ky) * k + kx;
              g.grad_weights.data[widx] += input.at(ic, iy, ix) * go;
              g.grad_input.at(ic, iy, ix) += weights.data[widx] * go;
            }
          }
        }
      }
    }
  }
  return g;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  if (!input.same_shape(grad_out)) throw std::invalid_argument("relu backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.data.size(); ++i)
    if (input.data[i] <= 0.0) g.data[i] = 0.0;
  return g;
}

namespace {

// Corner-aligned source coordinate for output index i.
inline double src_coord(int i, int out_extent, int in_extent) {
  if (out_extent == 1) return 0.0;
  return static_cast<double>(i) * (in_extent - 1) / (out_extent - 1);
}

}  // namespace

Tensor bilinear_upsample(const Tensor& input, int out_h, int out_w) {
  require_rank3(input, "upsample");
  const int c = input.dim(0), in_h = input.dim(1), in_w = input.dim(2);
  if (out_h < in_h || out_w < in_w)
    throw std::invalid_argument("upsample: output extents " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                                " smaller than input " + std::to_string(in_h) + "x" + std::to_string(in_w));
  if (out_h == in_h && out_w == in_w) return input;
  Tensor out({c, out_h, out_w});
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = src_coord(oy, out_h, in_h);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = src_coord(ox, out_w, in_w);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = input.at(ch, y0, x0) * (1.0 - fx) + input.at(ch, y0, x1) * fx;
        const double bot = input.at(ch, y1, x0) * (1.0 - fx) + input.at(ch, y1, x1) * fx;
        out.at(ch, oy, ox) = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

Tensor bilinear_upsample_backward(const Tensor& grad_out, int in_h, int in_w) {
  require_rank3(grad_out, "upsample backward");
  const int c = grad_out.dim(0), out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  if (out_h == in_h && out_w == in_w) return grad_out;
  Tensor g({c, in_h, in_w});
  for (int oy = 0; oy < out_h; ++oy) {
    const double sy = src_coord(oy, out_h, in_h);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, in_h - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double sx = src_coord(ox, out_w, in_w);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, in_w - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double go = grad_out.at(ch, oy, ox);
        g.at(ch, y0, x0) += go * (1.0 - fx) * (1.0 - fy);
        g.at(ch, y0, x1) += go * fx * (1.0 - fy);
        g.at(ch, y1, x0) += go * (1.0 - fx) * fy;
        g.at(ch, y1, x1) += go * fx * fy;
      }
    }
  }
  return g;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  require_rank3(parts[0], "concat");
  const int h = parts[0].dim(1), w = parts[0].dim(2);
  int total_c = 0;
  for (const Tensor& p : parts) {
    require_rank3(p, "concat");
    if (p.dim(1) != h || p.dim(2) != w)
      throw std::invalid_argument("concat: spatial extents " + std::to_string(p.dim(1)) + "x" +
                                  std::to_string(p.dim(2)) + " differ from " + std::to_string(h) + "x" +
                                  std::to_string(w));
    total_c += p.dim(0);
  }
  Tensor out({total_c, h, w});
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + offset);
    offset += p.data.size();
  }
  return out;
}

Tensor slice_channels(const Tensor& t, int first, int count) {
  require_rank3(t, "slice");
  if (first < 0 || count < 1 || first + count > t.dim(0))
    throw std::invalid_argument("slice: channel range [" + std::to_string(first) + "," +
                                std::to_string(first + count) + ") out of bounds for " + std::to_string(t.dim(0)) +
                                " channels");
  Tensor out({count, t.dim(1), t.dim(2)});
  const std::size_t plane = static_cast<std::size_t>(t.dim(1)) * t.dim(2);
  std::copy(t.data.begin() + first * plane, t.data.begin() + (first + count) * plane, out.data.begin());
  return out;
}

Tensor softmax_pixelwise(const Tensor& logits) {
  require_rank3(logits, "softmax");
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  Tensor out(logits.shape);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = logits.at(0, y, x);
      for (int ch = 1; ch < c; ++ch) m = std::max(m, logits.at(ch, y, x));
      double sum = 0.0;
      for (int ch = 0; ch < c; ++ch) {
        const double e = std::exp(logits.at(ch, y, x) - m);
        out.at(ch, y, x) = e;
        sum += e;
      }
      for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) /= sum;
    }
  }
  return out;
}

}  // namespace easal
