#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace easal {

// Dense row-major tensor of doubles. Canonical image order is
// channels x height x width; batches are handled by the caller.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(std::vector<int> s, double fill);

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

  std::size_t size() const { return data.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  // 3-D (c,h,w) access; tensor must be rank 3.
  double& at(int c, int y, int x);
  double at(int c, int y, int x) const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;   // odd
  int stride = 1;
  int padding = 0;
  int dilation = 1;

  // floor((in + 2p - l(k-1) - 1)/s) + 1
  int out_extent(int in_extent) const;
  void validate() const;
};

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      const Tensor& bias, const ConvSpec& spec);

struct ConvGrads {
  Tensor grad_input;
  Tensor grad_weights;
  Tensor grad_bias;
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                          const ConvSpec& spec, const Tensor& grad_out);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

Tensor bilinear_upsample(const Tensor& input, int out_h, int out_w);
// Transpose of bilinear_upsample: scatters grad_out back onto the input grid.
Tensor bilinear_upsample_backward(const Tensor& grad_out, int in_h, int in_w);

Tensor concat_channels(const std::vector<Tensor>& parts);
// Extracts channels [first, first+count) of a rank-3 tensor.
Tensor slice_channels(const Tensor& t, int first, int count);

Tensor softmax_pixelwise(const Tensor& logits);

}  // namespace easal
