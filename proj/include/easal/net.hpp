#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "easal/labelgen.hpp"
#include "easal/rbd.hpp"
#include "easal/tensor.hpp"

namespace easal {

struct ConvLayer {
  std::string name;
  ConvSpec spec;
  bool relu_after = false;
  Tensor w, b;    // parameters
  Tensor gw, gb;  // gradient buffers, same shapes
  Tensor vw, vb;  // momentum buffers

  void zero_grad();
};

struct WidthPlan {
  std::array<int, 4> encoder{8, 16, 16, 16};
  int fusion_width = 16;
};

struct TrainConfig {
  double base_lr = 1e-3;
  double momentum = 0.9;
  double poly_power = 0.9;
  int max_iter = 1000;
  std::uint64_t seed = 1;
  int image_size = 64;
};

// Toy edge-aware FCN: a 4-block encoder with total stride 4 and dilated
// blocks 3-4, a 3-channel prediction head (background / salient edge /
// salient object), four 1x1 side taps, a 3-layer fusion net over
// (I, S_s, S_RBD, sides), and an identity-initialized dilated context
// module.
struct Model {
  WidthPlan plan;
  std::vector<ConvLayer> encoder;       // 8 convs, two per block
  ConvLayer head;                       // 1x1 -> 3 (S_deep logits)
  std::array<ConvLayer, 4> side;        // 1x1 -> 1 at each block output
  std::array<ConvLayer, 3> fusion;      // 3x3 convs + ReLU, 9 -> F -> F -> 1
  ConvLayer ds_head;                    // 1x1, (S_b,S_e,S_ns) -> 3 logits
  std::vector<ConvLayer> context;       // dilations 1,2,4,8,1 then 1x1

  std::vector<ConvLayer*> all_layers();
  std::vector<const ConvLayer*> all_layers() const;
};

Model build_model(const WidthPlan& plan, std::uint64_t seed);

struct FrontendResult {
  Tensor s_deep;                 // 3xHxW logits, upsampled
  std::array<Tensor, 4> sides;   // 1xHxW each, upsampled
  // caches for backward
  std::vector<Tensor> enc_pre, enc_post;
  Tensor head_logits_lo;
  std::array<Tensor, 4> side_lo;
};

FrontendResult forward_frontend(const Model& model, const Tensor& image);

struct FuseResult {
  Tensor ds_logits;  // 3xHxW
  Tensor concat9, concat3, s_ns;
  std::array<Tensor, 3> fus_pre, fus_post;
};

FuseResult fuse(const Model& model, const Tensor& image, const Tensor& s_deep,
                const std::array<Tensor, 4>& sides, const Tensor& s_rbd);

struct ContextResult {
  Tensor output;
  std::vector<Tensor> acts;  // acts[0] = input, acts[i+1] = after layer i
};

ContextResult context_refine(const Model& model, const Tensor& logits);
// Runs only the first n_layers context layers (for receptive-field probes).
Tensor context_prefix_forward(const Model& model, const Tensor& input, int n_layers);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
};

// Eq-style class-balanced softmax loss over the three label classes; the
// per-class weight is the complement fraction of that class's pixel share.
LossResult balanced_loss(const Tensor& logits, const TriLabelMap& labels);

struct FullForward {
  FrontendResult frontend;
  FuseResult fused;
  ContextResult context;
};

FullForward forward_full(const Model& model, const Tensor& image, const Tensor& s_rbd);

// Backpropagates the two supervision gradients (on s_deep and on the
// context output) into every layer's gradient buffers. Buffers accumulate;
// call zero_grad first. Returns the gradient w.r.t. the S_RBD input channel.
Tensor backward_full(Model& model, const Tensor& image, const Tensor& s_rbd, const FullForward& fwd,
                     const Tensor& grad_s_deep, const Tensor& grad_context_out);

double poly_lr(const TrainConfig& config, int iter);
void sgd_step(Model& model, int iter, const TrainConfig& config);

struct TrainSample {
  Tensor image;      // 3xHxW
  BinaryMap mask;
};

struct TraceRow {
  int iter = 0;
  double lr = 0.0;
  double loss_frontend = 0.0;
  double loss_final = 0.0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  int skipped = 0;  // size-mismatched pairs
};

TrainResult train(Model& model, const std::vector<TrainSample>& dataset, const TrainConfig& config,
                  const RbdParams& rbd_params = {});

struct InferResult {
  Tensor saliency;       // P(object)
  Tensor salient_edge;   // P(edge)
  TriLabelMap labels;    // argmax, ties toward the lower class index
};

InferResult infer(const Model& model, const Tensor& image, const Tensor& s_rbd);
InferResult infer(const Model& model, const Tensor& image, const RbdParams& rbd_params = {});

// Checkpoint container: magic "EASAL1", width plan, layer table, float32
// little-endian payloads. Saving rounds the in-memory parameters to float32
// so that save -> load -> infer reproduces in-memory inference bit-exactly.
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace easal
