#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscc/hsi.hpp"
#include "sscc/kernels.hpp"
#include "sscc/losses.hpp"
#include "sscc/tensor.hpp"

namespace sscc {

using LatentBatch = Matrix;  // M x latent_dim
using LabelBatch = Matrix;   // M x C, rows are probability vectors

struct ConvBlockSpec {
  int out_channels = 32;
  int kernel = 3;
  int stride = 1;

  bool operator==(const ConvBlockSpec&) const = default;
};

/// Backbone: a stack of conv blocks ("same" zero padding, ReLU), each a
/// two-conv residual unit when `residual` is set, then global average pooling
/// and a linear layer with ReLU to `latent_dim`.
/// Head: linear(head_hidden) + ReLU, linear(cluster_count) + softmax.
struct NetworkConfig {
  int input_side = 13;
  int input_channels = 8;
  std::vector<ConvBlockSpec> conv_blocks{{32, 3, 1}, {64, 3, 1}, {128, 3, 1}};
  bool residual = true;
  int latent_dim = 256;
  int head_hidden = 512;
  int cluster_count = 4;

  void validate() const;
  /// Spatial extent after the conv stack for a given input side.
  int output_side(int input_side) const;

  bool operator==(const NetworkConfig&) const = default;
};

struct ParamTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

/// Parameters in declaration order. For block i: conv{i}.w1/b1, and when
/// residual conv{i}.w2/b2 plus an optional 1x1 projection conv{i}.ws/bs.
/// Then latent.w/b, head1.w/b, head2.w/b.
struct Network {
  NetworkConfig config;
  std::vector<ParamTensor> params;
  kernels::Backend backend = kernels::Backend::parallel;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

using Gradients = std::vector<std::vector<double>>;

Network build_network(const NetworkConfig& config, std::uint64_t seed);

/// Patches (row, col, channel) -> NCHW. All patches must share a shape.
Tensor4 patches_to_tensor(std::span<const Patch> batch);

/// Every intermediate activation of one forward pass, kept for backprop.
struct ForwardTrace {
  std::vector<Tensor4> block_inputs;  // block_inputs[i] feeds block i; the last entry is the stack output
  std::vector<Tensor4> block_mid;     // post-ReLU first conv of residual blocks
  Matrix pooled;
  LatentBatch latent;
  Matrix hidden;
  Matrix logits;
  LabelBatch labels;
};

struct ForwardResult {
  LatentBatch latent;
  LabelBatch labels;
};

/// Throws DivergenceError on non-finite activations and ConfigError on shape
/// mismatch or an empty batch.
ForwardTrace forward_trace(const Network& net, const Tensor4& input);
ForwardResult forward(const Network& net, std::span<const Patch> batch);

/// Reverse pass from dL/dlabels to every parameter.
Gradients backward(const Network& net, const ForwardTrace& trace, const Matrix& grad_labels);

struct GradientResult {
  LossBreakdown loss;
  Gradients grads;
  LabelBatch labels_a;
  LabelBatch labels_b;
};

/// Runs both views through the shared network and differentiates
/// L = L_B + alpha * L_W with respect to every parameter.
GradientResult forward_with_gradients(const Network& net, std::span<const Patch> batch_a,
                                      std::span<const Patch> batch_b, const LossConfig& loss);

/// Preprocessing that must be replayed at inference time.
struct PipelineMeta {
  int patch_side = 13;
  std::optional<PcaModel> pca;
};

struct Checkpoint {
  Network network;
  std::optional<PipelineMeta> pipeline;
};

/// Layout: "SSCKPT1", config, then every parameter tensor as float32 in
/// declaration order, then an optional pipeline section.
void save_checkpoint(const std::filesystem::path& path, const Network& net,
                     const std::optional<PipelineMeta>& pipeline = std::nullopt);
/// When `expected` is given, a checkpoint with a different config is rejected.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected = nullptr);

std::string describe(const NetworkConfig& config);

}  // namespace sscc
