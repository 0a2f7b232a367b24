#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "easal/tensor.hpp"
#include "test_util.hpp"

using namespace easal;
using test_util::max_abs_diff;
using test_util::random_tensor;
using test_util::rel_err;

namespace {

// Zero-stuffing oracle: an l-dilated kxk kernel equals a plain conv with
// the kernel spread to extent l(k-1)+1 with zeros between taps.
Tensor zero_stuff(const Tensor& w, int dilation) {
  const int oc = w.dim(0), ic = w.dim(1), k = w.dim(2);
  const int ks = dilation * (k - 1) + 1;
  Tensor out({oc, ic, ks, ks});
  for (int o = 0; o < oc; ++o)
    for (int i = 0; i < ic; ++i)
      for (int y = 0; y < k; ++y)
        for (int x = 0; x < k; ++x)
          out.data[((static_cast<std::size_t>(o) * ic + i) * ks + y * dilation) * ks + x * dilation] =
              w.data[((static_cast<std::size_t>(o) * ic + i) * k + y) * k + x];
  return out;
}

double sum_weighted(const Tensor& out, const Tensor& grad_out) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * grad_out.data[i];
  return s;
}

}  // namespace

TEST_CASE("conv2d box sum on all-ones input") {
  Tensor in({1, 3, 3}, 1.0), w({1, 1, 3, 3}, 1.0), b({1});
  ConvSpec spec{1, 1, 3, 1, 1, 1};
  Tensor out = conv2d_forward(in, w, b, spec);
  CHECK(out.at(0, 1, 1) == doctest::Approx(9.0));
  CHECK(out.at(0, 0, 0) == doctest::Approx(4.0));
  CHECK(out.at(0, 2, 2) == doctest::Approx(4.0));
  CHECK(out.at(0, 0, 1) == doctest::Approx(6.0));
}

TEST_CASE("dilated conv impulse response scatters kernel at spaced offsets") {
  Tensor in({1, 7, 7});
  in.at(0, 3, 3) = 1.0;
  std::mt19937_64 rng(7);
  Tensor w = random_tensor({1, 1, 3, 3}, rng);
  Tensor b({1});
  ConvSpec spec{1, 1, 3, 1, 2, 2};
  Tensor out = conv2d_forward(in, w, b, spec);
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx)
      // Cross-correlation form: output at center + (ky-1)*2 sees tap (2-ky, 2-kx).
      CHECK(out.at(0, 3 + (ky - 1) * 2, 3 + (kx - 1) * 2) ==
            doctest::Approx(w.data[static_cast<std::size_t>((2 - ky) * 3 + (2 - kx))]).epsilon(1e-12));
  // Everything off the dilated lattice stays zero.
  CHECK(out.at(0, 3, 2) == 0.0);
  CHECK(out.at(0, 2, 3) == 0.0);
}

TEST_CASE("dilated conv equals zero-stuffed plain conv") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int l = 2 + static_cast<int>(rng() % 3);
    Tensor in = random_tensor({2, 8, 8}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    const int p = l;
    Tensor out_dilated = conv2d_forward(in, w, b, ConvSpec{2, 3, 3, 1, p, l});
    Tensor ws = zero_stuff(w, l);
    Tensor out_plain = conv2d_forward(in, ws, b, ConvSpec{2, 3, 2 * l + 1, 1, p, 1});
    REQUIRE(out_dilated.shape == out_plain.shape);
    CHECK(max_abs_diff(out_dilated, out_plain) < 1e-12);
  }
}

TEST_CASE("conv shape law") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    ConvSpec spec;
    spec.kernel = 1 + 2 * static_cast<int>(rng() % 3);
    spec.stride = 1 + static_cast<int>(rng() % 3);
    spec.padding = static_cast<int>(rng() % 4);
    spec.dilation = 1 + static_cast<int>(rng() % 3);
    const int in = 1 + static_cast<int>(rng() % 16);
    const int expect = (in + 2 * spec.padding - spec.dilation * (spec.kernel - 1) - 1) / spec.stride + 1;
    if (expect < 1) continue;
    Tensor input({1, in, in}, 1.0);
    Tensor w({1, 1, spec.kernel, spec.kernel}, 0.5), b({1});
    Tensor out = conv2d_forward(input, w, b, spec);
    CHECK(out.dim(1) == expect);
    CHECK(out.dim(2) == expect);
  }
}

TEST_CASE("conv linearity with zero bias") {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({2, 6, 6}, rng), y = random_tensor({2, 6, 6}, rng);
  Tensor w = random_tensor({2, 2, 3, 3}, rng);
  Tensor b({2});
  ConvSpec spec{2, 2, 3, 1, 1, 1};
  const double a = 1.7, c = -0.3;
  Tensor combo({2, 6, 6});
  for (std::size_t i = 0; i < combo.data.size(); ++i) combo.data[i] = a * x.data[i] + c * y.data[i];
  Tensor lhs = conv2d_forward(combo, w, b, spec);
  Tensor rx = conv2d_forward(x, w, b, spec), ry = conv2d_forward(y, w, b, spec);
  Tensor rhs({2, 6, 6});
  for (std::size_t i = 0; i < rhs.data.size(); ++i) rhs.data[i] = a * rx.data[i] + c * ry.data[i];
  CHECK(max_abs_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("conv rejects bad shapes with a diagnostic") {
  Tensor in({2, 4, 4}), w({1, 1, 3, 3}), b({1});
  CHECK_THROWS_WITH_AS(conv2d_forward(in, w, b, ConvSpec{1, 1, 3, 1, 1, 1}),
                       doctest::Contains("channel"), std::invalid_argument);
  Tensor in1({1, 2, 2});
  CHECK_THROWS_AS(conv2d_forward(in1, w, b, ConvSpec{1, 1, 3, 1, 0, 1}), std::invalid_argument);
}

TEST_CASE("conv backward zero grad_out gives zero gradients") {
  std::mt19937_64 rng(13);
  Tensor in = random_tensor({2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  ConvSpec spec{2, 3, 3, 1, 1, 1};
  ConvGrads g = conv2d_backward(in, w, spec, Tensor({3, 5, 5}));
  for (double v : g.grad_input.data) CHECK(v == 0.0);
  for (double v : g.grad_weights.data) CHECK(v == 0.0);
  for (double v : g.grad_bias.data) CHECK(v == 0.0);
}

TEST_CASE("conv backward scalar chain rule on 1x1 case") {
  Tensor in({1, 1, 1});
  in.data[0] = 3.0;
  Tensor w({1, 1, 1, 1});
  w.data[0] = -2.0;
  Tensor go({1, 1, 1});
  go.data[0] = 0.5;
  ConvGrads g = conv2d_backward(in, w, ConvSpec{1, 1, 1, 1, 0, 1}, go);
  CHECK(g.grad_weights.data[0] == doctest::Approx(1.5));
  CHECK(g.grad_input.data[0] == doctest::Approx(-1.0));
  CHECK(g.grad_bias.data[0] == doctest::Approx(0.5));
}

TEST_CASE("conv backward matches finite differences") {
  std::mt19937_64 rng(17);
  ConvSpec spec{2, 2, 3, 2, 1, 1};
  Tensor in = random_tensor({2, 4, 4}, rng);
  Tensor w = random_tensor({2, 2, 3, 3}, rng);
  Tensor b = random_tensor({2}, rng);
  Tensor out = conv2d_forward(in, w, b, spec);
  Tensor go = random_tensor(out.shape, rng);
  ConvGrads g = conv2d_backward(in, w, spec, go);

  const double h = 1e-4;
  auto loss_at = [&](const Tensor& i2, const Tensor& w2, const Tensor& b2) {
    return sum_weighted(conv2d_forward(i2, w2, b2, spec), go);
  };
  for (std::size_t i = 0; i < in.data.size(); ++i) {
    Tensor p = in, m = in;
    p.data[i] += h;
    m.data[i] -= h;
    const double fd = (loss_at(p, w, b) - loss_at(m, w, b)) / (2 * h);
    CHECK(rel_err(g.grad_input.data[i], fd) < 1e-3);
  }
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    Tensor p = w, m = w;
    p.data[i] += h;
    m.data[i] -= h;
    const double fd = (loss_at(in, p, b) - loss_at(in, m, b)) / (2 * h);
    CHECK(rel_err(g.grad_weights.data[i], fd) < 1e-3);
  }
  for (std::size_t i = 0; i < b.data.size(); ++i) {
    Tensor p = b, m = b;
    p.data[i] += h;
    m.data[i] -= h;
    const double fd = (loss_at(in, w, p) - loss_at(in, w, m)) / (2 * h);
    CHECK(rel_err(g.grad_bias.data[i], fd) < 1e-3);
  }
}

TEST_CASE("relu forward and backward") {
  Tensor in({1, 1, 3});
  in.data = {-1.0, 0.0, 2.0};
  Tensor out = relu(in);
  CHECK(out.data[0] == 0.0);
  CHECK(out.data[1] == 0.0);
  CHECK(out.data[2] == 2.0);

  Tensor neg({1, 2, 2}, -3.0);
  for (double v : relu(neg).data) CHECK(v == 0.0);

  Tensor go({1, 1, 3}, 1.0);
  Tensor g = relu_backward(in, go);
  CHECK(g.data[0] == 0.0);
  CHECK(g.data[1] == 0.0);  // tie at zero passes zero gradient
  CHECK(g.data[2] == 1.0);

  // Finite differences away from the kink.
  std::mt19937_64 rng(19);
  Tensor x = random_tensor({1, 4, 4}, rng);
  for (double& v : x.data)
    if (std::abs(v) < 0.1) v += v >= 0 ? 0.2 : -0.2;
  Tensor gox = random_tensor({1, 4, 4}, rng);
  Tensor gx = relu_backward(x, gox);
  const double h = 1e-4;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    Tensor p = x, m = x;
    p.data[i] += h;
    m.data[i] -= h;
    const double fd = (sum_weighted(relu(p), gox) - sum_weighted(relu(m), gox)) / (2 * h);
    CHECK(rel_err(gx.data[i], fd) < 1e-3);
  }
}

TEST_CASE("bilinear upsample identity, ramp, constant") {
  std::mt19937_64 rng(23);
  Tensor sq = random_tensor({1, 2, 2}, rng);
  CHECK(max_abs_diff(bilinear_upsample(sq, 2, 2), sq) == 0.0);

  Tensor ramp({1, 1, 2});
  ramp.data = {0.0, 1.0};
  Tensor up = bilinear_upsample(ramp, 1, 5);
  const double want[5] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (int i = 0; i < 5; ++i) CHECK(up.data[static_cast<std::size_t>(i)] == doctest::Approx(want[i]).epsilon(1e-12));

  Tensor c({2, 3, 3}, 0.42);
  Tensor cu = bilinear_upsample(c, 9, 7);
  for (double v : cu.data) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));

  CHECK_THROWS_AS(bilinear_upsample(c, 2, 2), std::invalid_argument);
}

TEST_CASE("bilinear upsample backward is the transpose") {
  std::mt19937_64 rng(29);
  Tensor in = random_tensor({2, 4, 4}, rng);
  Tensor go = random_tensor({2, 9, 9}, rng);
  Tensor g = bilinear_upsample_backward(go, 4, 4);
  // <upsample(x), g_out> == <x, upsample^T(g_out)>
  const double lhs = sum_weighted(bilinear_upsample(in, 9, 9), go);
  double rhs = 0.0;
  for (std::size_t i = 0; i < in.data.size(); ++i) rhs += in.data[i] * g.data[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("concat channels") {
  std::mt19937_64 rng(31);
  Tensor a = random_tensor({3, 8, 8}, rng), b = random_tensor({1, 8, 8}, rng), c = random_tensor({1, 8, 8}, rng);
  std::vector<Tensor> parts{a, b, c};
  for (int i = 0; i < 4; ++i) parts.push_back(random_tensor({1, 8, 8}, rng));
  Tensor out = concat_channels(parts);
  CHECK(out.dim(0) == 9);
  CHECK(out.dim(1) == 8);
  CHECK(out.dim(2) == 8);

  int offset = 0;
  for (const Tensor& p : parts) {
    CHECK(max_abs_diff(slice_channels(out, offset, p.dim(0)), p) == 0.0);
    offset += p.dim(0);
  }

  CHECK(max_abs_diff(concat_channels({a}), a) == 0.0);
  Tensor bad = random_tensor({1, 4, 8}, rng);
  CHECK_THROWS_AS(concat_channels({a, bad}), std::invalid_argument);
}

TEST_CASE("pixelwise softmax") {
  Tensor eq({3, 2, 2}, 1.3);
  Tensor p = softmax_pixelwise(eq);
  for (double v : p.data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Tensor big({3, 1, 1});
  big.data = {1000.0, 0.0, 0.0};
  Tensor pb = softmax_pixelwise(big);
  CHECK(pb.all_finite());
  CHECK(pb.data[0] == doctest::Approx(1.0));
  CHECK(pb.data[1] == doctest::Approx(0.0));

  std::mt19937_64 rng(37);
  Tensor r = random_tensor({5, 6, 6}, rng, -10.0, 10.0);
  Tensor pr = softmax_pixelwise(r);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) {
      double s = 0.0;
      for (int c = 0; c < 5; ++c) {
        const double v = pr.at(c, y, x);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}
