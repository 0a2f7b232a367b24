#include "easal/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace easal {

void ConvLayer::zero_grad() {
  std::fill(gw.data.begin(), gw.data.end(), 0.0);
  std::fill(gb.data.begin(), gb.data.end(), 0.0);
}

std::vector<ConvLayer*> Model::all_layers() {
  std::vector<ConvLayer*> out;
  for (ConvLayer& l : encoder) out.push_back(&l);
  out.push_back(&head);
  for (ConvLayer& l : side) out.push_back(&l);
  for (ConvLayer& l : fusion) out.push_back(&l);
  out.push_back(&ds_head);
  for (ConvLayer& l : context) out.push_back(&l);
  return out;
}

std::vector<const ConvLayer*> Model::all_layers() const {
  std::vector<const ConvLayer*> out;
  for (const ConvLayer& l : encoder) out.push_back(&l);
  out.push_back(&head);
  for (const ConvLayer& l : side) out.push_back(&l);
  for (const ConvLayer& l : fusion) out.push_back(&l);
  out.push_back(&ds_head);
  for (const ConvLayer& l : context) out.push_back(&l);
  return out;
}

namespace {

// Platform-stable uniform in [0,1) from the raw 64-bit stream.
double next_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

ConvLayer make_layer(std::string name, ConvSpec spec, bool relu_after, std::mt19937_64& rng) {
  ConvLayer l;
  l.name = std::move(name);
  l.spec = spec;
  l.relu_after = relu_after;
  l.w = Tensor({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel});
  l.b = Tensor({spec.out_channels});
  const double fan_in = static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel;
  const double fan_out = static_cast<double>(spec.out_channels) * spec.kernel * spec.kernel;
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : l.w.data) v = (next_uniform(rng) * 2.0 - 1.0) * a;
  l.gw = Tensor(l.w.shape);
  l.gb = Tensor(l.b.shape);
  l.vw = Tensor(l.w.shape);
  l.vb = Tensor(l.b.shape);
  return l;
}

void identity_init(ConvLayer& l) {
  std::fill(l.w.data.begin(), l.w.data.end(), 0.0);
  std::fill(l.b.data.begin(), l.b.data.end(), 0.0);
  const int k = l.spec.kernel, center = k / 2;
  for (int oc = 0; oc < l.spec.out_channels; ++oc) {
    // Channel oc carries input channel (oc mod in): widening replicates
    // channels and the final 1x1 projection picks the originals back.
    const int ic = oc % l.spec.in_channels;
    l.w.data[((static_cast<std::size_t>(oc) * l.spec.in_channels + ic) * k + center) * k + center] = 1.0;
  }
}

}  // namespace

Model build_model(const WidthPlan& plan, std::uint64_t seed) {
  for (int wdt : plan.encoder)
    if (wdt < 1) throw std::invalid_argument("build_model: encoder widths must be positive");
  if (plan.fusion_width < 1) throw std::invalid_argument("build_model: fusion width must be positive");

  std::mt19937_64 rng(seed);
  Model m;
  m.plan = plan;

  const int c1 = plan.encoder[0], c2 = plan.encoder[1], c3 = plan.encoder[2], c4 = plan.encoder[3];
  // Blocks 1-2 downsample by stride 2; blocks 3-4 use dilation 2 and 4
  // instead of further striding, so the total output stride stays 4.
  m.encoder.push_back(make_layer("enc1a", {3, c1, 3, 2, 1, 1}, true, rng));
  m.encoder.push_back(make_layer("enc1b", {c1, c1, 3, 1, 1, 1}, true, rng));
  m.encoder.push_back(make_layer("enc2a", {c1, c2, 3, 2, 1, 1}, true, rng));
  m.encoder.push_back(make_layer("enc2b", {c2, c2, 3, 1, 1, 1}, true, rng));
  m.encoder.push_back(make_layer("enc3a", {c2, c3, 3, 1, 2, 2}, true, rng));
  m.encoder.push_back(make_layer("enc3b", {c3, c3, 3, 1, 2, 2}, true, rng));
  m.encoder.push_back(make_layer("enc4a", {c3, c4, 3, 1, 4, 4}, true, rng));
  m.encoder.push_back(make_layer("enc4b", {c4, c4, 3, 1, 4, 4}, true, rng));

  m.head = make_layer("head", {c4, 3, 1, 1, 0, 1}, false, rng);

  const std::array<int, 4> tap_ch{c1, c2, c3, c4};
  for (int i = 0; i < 4; ++i)
    m.side[static_cast<std::size_t>(i)] =
        make_layer("side" + std::to_string(i + 1), {tap_ch[static_cast<std::size_t>(i)], 1, 1, 1, 0, 1}, false, rng);

  const int fw = plan.fusion_width;
  m.fusion[0] = make_layer("fuse1", {9, fw, 3, 1, 1, 1}, true, rng);
  m.fusion[1] = make_layer("fuse2", {fw, fw, 3, 1, 1, 1}, true, rng);
  m.fusion[2] = make_layer("fuse3", {fw, 1, 3, 1, 1, 1}, true, rng);

  m.ds_head = make_layer("ds_head", {3, 3, 1, 1, 0, 1}, false, rng);

  // Context module: exponentially increasing dilation, hidden width 2x the
  // class count, no nonlinearity, exact identity at initialization.
  m.context.push_back(make_layer("ctx_d1", {3, 6, 3, 1, 1, 1}, false, rng));
  m.context.push_back(make_layer("ctx_d2", {6, 6, 3, 1, 2, 2}, false, rng));
  m.context.push_back(make_layer("ctx_d4", {6, 6, 3, 1, 4, 4}, false, rng));
  m.context.push_back(make_layer("ctx_d8", {6, 6, 3, 1, 8, 8}, false, rng));
  m.context.push_back(make_layer("ctx_d1b", {6, 6, 3, 1, 1, 1}, false, rng));
  m.context.push_back(make_layer("ctx_proj", {6, 3, 1, 1, 0, 1}, false, rng));
  for (ConvLayer& l : m.context) identity_init(l);
  return m;
}

FrontendResult forward_frontend(const Model& model, const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) throw std::invalid_argument("frontend: expected 3xHxW image");
  const int h = image.dim(1), w = image.dim(2);
  if (h % 4 != 0 || w % 4 != 0)
    throw std::invalid_argument("frontend: input extents must be divisible by 4; pad to " +
                                std::to_string((h + 3) / 4 * 4) + "x" + std::to_string((w + 3) / 4 * 4));

  FrontendResult r;
  Tensor x = image;
  for (const ConvLayer& l : model.encoder) {
    Tensor pre = conv2d_forward(x, l.w, l.b, l.spec);
    Tensor post = relu(pre);
    r.enc_pre.push_back(std::move(pre));
    r.enc_post.push_back(post);
    x = std::move(post);
  }

  const std::array<int, 4> tap_idx{1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) {
    const ConvLayer& sl = model.side[static_cast<std::size_t>(i)];
    Tensor lo = conv2d_forward(r.enc_post[static_cast<std::size_t>(tap_idx[static_cast<std::size_t>(i)])], sl.w,
                               sl.b, sl.spec);
    r.sides[static_cast<std::size_t>(i)] = bilinear_upsample(lo, h, w);
    r.side_lo[static_cast<std::size_t>(i)] = std::move(lo);
  }

  r.head_logits_lo = conv2d_forward(r.enc_post.back(), model.head.w, model.head.b, model.head.spec);
  r.s_deep = bilinear_upsample(r.head_logits_lo, h, w);
  return r;
}

FuseResult fuse(const Model& model, const Tensor& image, const Tensor& s_deep,
                const std::array<Tensor, 4>& sides, const Tensor& s_rbd) {
  const int h = image.dim(1), w = image.dim(2);
  auto check = [&](const Tensor& t, const char* what) {
    if (t.dim(1) != h || t.dim(2) != w)
      throw std::invalid_argument(std::string("fuse: ") + what + " resolution " + std::to_string(t.dim(1)) + "x" +
                                  std::to_string(t.dim(2)) + " does not match image " + std::to_string(h) + "x" +
                                  std::to_string(w));
  };
  check(s_deep, "s_deep");
  check(s_rbd, "s_rbd");
  for (const Tensor& s : sides) check(s, "side output");

  FuseResult r;
  const Tensor s_s = slice_channels(s_deep, 2, 1);
  r.concat9 = concat_channels({image, s_s, s_rbd, sides[0], sides[1], sides[2], sides[3]});

  Tensor x = r.concat9;
  for (int i = 0; i < 3; ++i) {
    const ConvLayer& l = model.fusion[static_cast<std::size_t>(i)];
    Tensor pre = conv2d_forward(x, l.w, l.b, l.spec);
    Tensor post = relu(pre);
    r.fus_pre[static_cast<std::size_t>(i)] = std::move(pre);
    r.fus_post[static_cast<std::size_t>(i)] = post;
    x = std::move(post);
  }
  r.s_ns = r.fus_post[2];

  r.concat3 = concat_channels({slice_channels(s_deep, 0, 1), slice_channels(s_deep, 1, 1), r.s_ns});
  r.ds_logits = conv2d_forward(r.concat3, model.ds_head.w, model.ds_head.b, model.ds_head.spec);
  return r;
}

ContextResult context_refine(const Model& model, const Tensor& logits) {
  if (logits.rank() != 3 || logits.dim(0) != 3) throw std::invalid_argument("context: expected 3-channel input");
  ContextResult r;
  r.acts.push_back(logits);
  for (const ConvLayer& l : model.context) r.acts.push_back(conv2d_forward(r.acts.back(), l.w, l.b, l.spec));
  r.output = r.acts.back();
  return r;
}

Tensor context_prefix_forward(const Model& model, const Tensor& input, int n_layers) {
  if (n_layers < 0 || n_layers > static_cast<int>(model.context.size()))
    throw std::invalid_argument("context prefix: invalid layer count");
  Tensor x = input;
  for (int i = 0; i < n_layers; ++i) {
    const ConvLayer& l = model.context[static_cast<std::size_t>(i)];
    x = conv2d_forward(x, l.w, l.b, l.spec);
  }
  return x;
}

LossResult balanced_loss(const Tensor& logits, const TriLabelMap& labels) {
  if (logits.rank() != 3 || logits.dim(0) != 3 || logits.dim(1) != labels.height || logits.dim(2) != labels.width)
    throw std::invalid_argument("loss: logits must be 3x" + std::to_string(labels.height) + "x" +
                                std::to_string(labels.width));
  const double total = static_cast<double>(labels.total());
  const double nb = static_cast<double>(labels.counts[0]);
  const double ne = static_cast<double>(labels.counts[1]);
  const double ns = static_cast<double>(labels.counts[2]);
  const std::array<double, 3> beta{(ne + ns) / total, (nb + ns) / total, (nb + ne) / total};

  LossResult r;
  r.grad_logits = Tensor(logits.shape);
  const int h = labels.height, w = labels.width;
  double loss = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int cls = labels.at(y, x);
      const double bw = beta[static_cast<std::size_t>(cls)];
      double m = logits.at(0, y, x);
      for (int c = 1; c < 3; ++c) m = std::max(m, logits.at(c, y, x));
      double sum = 0.0;
      std::array<double, 3> e{};
      for (int c = 0; c < 3; ++c) {
        e[static_cast<std::size_t>(c)] = std::exp(logits.at(c, y, x) - m);
        sum += e[static_cast<std::size_t>(c)];
      }
      // log P(cls) = logit - m - log(sum); stays finite for any logits.
      loss -= bw * (logits.at(cls, y, x) - m - std::log(sum));
      for (int c = 0; c < 3; ++c) {
        const double p = e[static_cast<std::size_t>(c)] / sum;
        r.grad_logits.at(c, y, x) = bw * (p - (c == cls ? 1.0 : 0.0));
      }
    }
  }
  r.loss = loss;
  return r;
}

FullForward forward_full(const Model& model, const Tensor& image, const Tensor& s_rbd) {
  FullForward f;
  f.frontend = forward_frontend(model, image);
  f.fused = fuse(model, image, f.frontend.s_deep, f.frontend.sides, s_rbd);
  f.context = context_refine(model, f.fused.ds_logits);
  return f;
}

namespace {

// conv backward that accumulates into the layer's gradient buffers and
// returns the input gradient.
Tensor conv_backward_acc(ConvLayer& l, const Tensor& input, const Tensor& grad_out) {
  ConvGrads g = conv2d_backward(input, l.w, l.spec, grad_out);
  for (std::size_t i = 0; i < l.gw.data.size(); ++i) l.gw.data[i] += g.grad_weights.data[i];
  for (std::size_t i = 0; i < l.gb.data.size(); ++i) l.gb.data[i] += g.grad_bias.data[i];
  return std::move(g.grad_input);
}

void add_into_channel(Tensor& dst, int channel, const Tensor& src) {
  const std::size_t plane = static_cast<std::size_t>(dst.dim(1)) * dst.dim(2);
  for (std::size_t i = 0; i < plane; ++i) dst.data[channel * plane + i] += src.data[i];
}

}  // namespace

Tensor backward_full(Model& model, const Tensor& image, const Tensor& s_rbd, const FullForward& fwd,
                     const Tensor& grad_s_deep, const Tensor& grad_context_out) {
  (void)s_rbd;
  const int h = image.dim(1), w = image.dim(2);

  // Context module (linear).
  Tensor g = grad_context_out;
  for (int i = static_cast<int>(model.context.size()) - 1; i >= 0; --i)
    g = conv_backward_acc(model.context[static_cast<std::size_t>(i)], fwd.context.acts[static_cast<std::size_t>(i)], g);

  // ds head over (S_b, S_e, S_ns).
  Tensor g_concat3 = conv_backward_acc(model.ds_head, fwd.fused.concat3, g);

  Tensor g_s_deep = grad_s_deep;  // frontend supervision term
  add_into_channel(g_s_deep, 0, slice_channels(g_concat3, 0, 1));
  add_into_channel(g_s_deep, 1, slice_channels(g_concat3, 1, 1));

  // Fusion stack (ReLU after every conv).
  Tensor g_fus = slice_channels(g_concat3, 2, 1);
  for (int i = 2; i >= 0; --i) {
    g_fus = relu_backward(fwd.fused.fus_pre[static_cast<std::size_t>(i)], g_fus);
    const Tensor& in = i == 0 ? fwd.fused.concat9 : fwd.fused.fus_post[static_cast<std::size_t>(i - 1)];
    g_fus = conv_backward_acc(model.fusion[static_cast<std::size_t>(i)], in, g_fus);
  }
  // concat9 layout: I(3), S_s(1), S_RBD(1), sides(4).
  add_into_channel(g_s_deep, 2, slice_channels(g_fus, 3, 1));
  Tensor g_rbd = slice_channels(g_fus, 4, 1);

  // Gradients arriving at encoder block outputs (enc_post indices 1,3,5,7).
  std::vector<Tensor> g_block(4);
  const std::array<int, 4> tap_idx{1, 3, 5, 7};
  for (int i = 0; i < 4; ++i) {
    const Tensor g_side_up = slice_channels(g_fus, 5 + i, 1);
    const Tensor& lo = fwd.frontend.side_lo[static_cast<std::size_t>(i)];
    Tensor g_lo = bilinear_upsample_backward(g_side_up, lo.dim(1), lo.dim(2));
    g_block[static_cast<std::size_t>(i)] = conv_backward_acc(
        model.side[static_cast<std::size_t>(i)],
        fwd.frontend.enc_post[static_cast<std::size_t>(tap_idx[static_cast<std::size_t>(i)])], g_lo);
  }

  // Prediction head.
  {
    const Tensor& lo = fwd.frontend.head_logits_lo;
    Tensor g_lo = bilinear_upsample_backward(g_s_deep, lo.dim(1), lo.dim(2));
    Tensor g_head_in = conv_backward_acc(model.head, fwd.frontend.enc_post.back(), g_lo);
    for (std::size_t i = 0; i < g_head_in.data.size(); ++i) g_block[3].data[i] += g_head_in.data[i];
  }

  // Encoder, deepest first.
  Tensor g_enc = std::move(g_block[3]);
  for (int i = 7; i >= 0; --i) {
    g_enc = relu_backward(fwd.frontend.enc_pre[static_cast<std::size_t>(i)], g_enc);
    const Tensor& in = i == 0 ? image : fwd.frontend.enc_post[static_cast<std::size_t>(i - 1)];
    g_enc = conv_backward_acc(model.encoder[static_cast<std::size_t>(i)], in, g_enc);
    // Add side-tap gradients where blocks end.
    if (i == 6) for (std::size_t j = 0; j < g_enc.data.size(); ++j) g_enc.data[j] += g_block[2].data[j];
    if (i == 4) for (std::size_t j = 0; j < g_enc.data.size(); ++j) g_enc.data[j] += g_block[1].data[j];
    if (i == 2) for (std::size_t j = 0; j < g_enc.data.size(); ++j) g_enc.data[j] += g_block[0].data[j];
  }
  (void)h;
  (void)w;
  return g_rbd;
}

double poly_lr(const TrainConfig& config, int iter) {
  return config.base_lr * std::pow(1.0 - static_cast<double>(iter) / config.max_iter, config.poly_power);
}

void sgd_step(Model& model, int iter, const TrainConfig& config) {
  if (iter >= config.max_iter) throw std::invalid_argument("sgd_step: iter must be < max_iter");
  const double lr = poly_lr(config, iter);
  for (ConvLayer* l : model.all_layers()) {
    for (std::size_t i = 0; i < l->w.data.size(); ++i) {
      l->vw.data[i] = config.momentum * l->vw.data[i] - lr * l->gw.data[i];
      l->w.data[i] += l->vw.data[i];
    }
    for (std::size_t i = 0; i < l->b.data.size(); ++i) {
      l->vb.data[i] = config.momentum * l->vb.data[i] - lr * l->gb.data[i];
      l->b.data[i] += l->vb.data[i];
    }
  }
}

TrainResult train(Model& model, const std::vector<TrainSample>& dataset, const TrainConfig& config,
                  const RbdParams& rbd_params) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");

  struct Prepared {
    const TrainSample* sample;
    TriLabelMap labels;
    Tensor s_rbd;
  };
  TrainResult result;
  std::vector<Prepared> prepared;
  for (const TrainSample& s : dataset) {
    if (s.image.dim(1) != s.mask.height || s.image.dim(2) != s.mask.width) {
      result.skipped += 1;
      continue;
    }
    BinaryMap mask = s.mask;
    prepared.push_back({&s, three_category_labels(mask), rbd_saliency(s.image, rbd_params)});
  }
  if (prepared.empty()) throw std::invalid_argument("train: no usable image/mask pairs");

  for (int iter = 0; iter < config.max_iter; ++iter) {
    const Prepared& p = prepared[static_cast<std::size_t>(iter) % prepared.size()];
    FullForward fwd = forward_full(model, p.sample->image, p.s_rbd);
    LossResult l1 = balanced_loss(fwd.frontend.s_deep, p.labels);
    LossResult l2 = balanced_loss(fwd.context.output, p.labels);
    // The descent direction divides by the total beta-weighted pixel mass,
    // turning each supervision term into a weighted mean. The raw sums grow
    // with resolution and blow past any usable step size; the trace still
    // records the summed loss values.
    const double nb = static_cast<double>(p.labels.counts[0]), ne = static_cast<double>(p.labels.counts[1]),
                 ns = static_cast<double>(p.labels.counts[2]), tot = static_cast<double>(p.labels.total());
    const double wmass = ((ne + ns) * nb + (nb + ns) * ne + (nb + ne) * ns) / tot;
    const double scale = 1.0 / std::max(wmass, 1.0);
    for (double& v : l1.grad_logits.data) v *= scale;
    for (double& v : l2.grad_logits.data) v *= scale;
    for (ConvLayer* l : model.all_layers()) l->zero_grad();
    backward_full(model, p.sample->image, p.s_rbd, fwd, l1.grad_logits, l2.grad_logits);
    sgd_step(model, iter, config);
    result.trace.push_back({iter, poly_lr(config, iter), l1.loss, l2.loss});
  }
  return result;
}

InferResult infer(const Model& model, const Tensor& image, const Tensor& s_rbd) {
  FullForward fwd = forward_full(model, image, s_rbd);
  const Tensor probs = softmax_pixelwise(fwd.context.output);
  InferResult r;
  r.saliency = slice_channels(probs, 2, 1);
  r.salient_edge = slice_channels(probs, 1, 1);
  r.labels.height = probs.dim(1);
  r.labels.width = probs.dim(2);
  r.labels.labels.resize(static_cast<std::size_t>(probs.dim(1)) * probs.dim(2));
  r.labels.counts = {0, 0, 0};
  for (int y = 0; y < probs.dim(1); ++y) {
    for (int x = 0; x < probs.dim(2); ++x) {
      int best = 0;
      for (int c = 1; c < 3; ++c)
        if (probs.at(c, y, x) > probs.at(best, y, x)) best = c;  // ties keep the lower index
      r.labels.labels[static_cast<std::size_t>(y) * probs.dim(2) + x] = static_cast<std::uint8_t>(best);
      r.labels.counts[static_cast<std::size_t>(best)] += 1;
    }
  }
  return r;
}

InferResult infer(const Model& model, const Tensor& image, const RbdParams& rbd_params) {
  return infer(model, image, rbd_saliency(image, rbd_params));
}

namespace {

constexpr char kMagic[6] = {'E', 'A', 'S', 'A', 'L', '1'};

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated: " + path.string());
  return v;
}

void write_tensor_f32(std::ostream& out, Tensor& t) {
  write_pod<std::uint64_t>(out, t.data.size());
  for (double& v : t.data) {
    const float f = static_cast<float>(v);
    v = f;  // keep the in-memory model identical to what the file stores
    write_pod<float>(out, f);
  }
}

void read_tensor_f32(std::istream& in, Tensor& t, const std::filesystem::path& path) {
  const auto n = read_pod<std::uint64_t>(in, path);
  if (n != t.data.size())
    throw std::runtime_error("checkpoint layer payload size mismatch in " + path.string());
  for (double& v : t.data) v = read_pod<float>(in, path);
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    for (int wdt : model.plan.encoder) write_pod<std::int32_t>(out, wdt);
    write_pod<std::int32_t>(out, model.plan.fusion_width);
    auto layers = model.all_layers();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
    for (ConvLayer* l : layers) {
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l->name.size()));
      out.write(l->name.data(), static_cast<std::streamsize>(l->name.size()));
      write_pod<std::int32_t>(out, l->spec.in_channels);
      write_pod<std::int32_t>(out, l->spec.out_channels);
      write_pod<std::int32_t>(out, l->spec.kernel);
      write_pod<std::int32_t>(out, l->spec.stride);
      write_pod<std::int32_t>(out, l->spec.padding);
      write_pod<std::int32_t>(out, l->spec.dilation);
      write_pod<std::uint8_t>(out, l->relu_after ? 1 : 0);
      write_tensor_f32(out, l->w);
      write_tensor_f32(out, l->b);
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[6];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint magic mismatch in " + path.string() + ": expected EASAL1, got '" +
                             std::string(magic, in ? 6 : in.gcount()) + "'");
  WidthPlan plan;
  for (int i = 0; i < 4; ++i) plan.encoder[static_cast<std::size_t>(i)] = read_pod<std::int32_t>(in, path);
  plan.fusion_width = read_pod<std::int32_t>(in, path);

  Model model = build_model(plan, 0);
  auto layers = model.all_layers();
  const auto n_layers = read_pod<std::uint32_t>(in, path);
  if (n_layers != layers.size()) throw std::runtime_error("checkpoint layer table mismatch in " + path.string());
  for (ConvLayer* l : layers) {
    const auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != l->name)
      throw std::runtime_error("checkpoint layer '" + name + "' does not match expected '" + l->name + "'");
    ConvSpec s;
    s.in_channels = read_pod<std::int32_t>(in, path);
    s.out_channels = read_pod<std::int32_t>(in, path);
    s.kernel = read_pod<std::int32_t>(in, path);
    s.stride = read_pod<std::int32_t>(in, path);
    s.padding = read_pod<std::int32_t>(in, path);
    s.dilation = read_pod<std::int32_t>(in, path);
    const auto relu_flag = read_pod<std::uint8_t>(in, path);
    if (s.in_channels != l->spec.in_channels || s.out_channels != l->spec.out_channels ||
        s.kernel != l->spec.kernel || s.stride != l->spec.stride || s.padding != l->spec.padding ||
        s.dilation != l->spec.dilation || (relu_flag != 0) != l->relu_after)
      throw std::runtime_error("checkpoint layer spec mismatch for '" + name + "' in " + path.string());
    read_tensor_f32(in, l->w, path);
    read_tensor_f32(in, l->b, path);
  }
  return model;
}

}  // namespace easal
