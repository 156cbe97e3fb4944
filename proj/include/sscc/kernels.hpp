#pragma once

// Compute kernels behind the network. Each kernel exists twice: a plain
// serial reference written for readability and an OpenMP version that
// parallelizes over samples (forward, input gradients) or over output
// channels (weight gradients). Both write every output element from exactly
// one thread in a fixed order, so results do not depend on the thread count,
// and a sample's outputs do not depend on the rest of the batch.

#include <span>

#include "sscc/tensor.hpp"

namespace sscc::kernels {

enum class Backend { serial, parallel };

struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
  std::size_t weight_count() const { return std::size_t(out_channels) * in_channels * kernel * kernel; }
};

/// out = conv(in, weight) + bias. weight is (out, in, k, k), zero padding.
void conv2d_forward(Backend backend, const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                    std::span<const double> bias, Tensor4& out);

/// Gradients of conv2d_forward. grad_weight and grad_bias are overwritten;
/// grad_in is skipped when null.
void conv2d_backward(Backend backend, const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                     const Tensor4& grad_out, Tensor4* grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias);

/// out = in * weight^T + bias, with weight (out_features, in_features).
void linear_forward(Backend backend, const Matrix& in, std::span<const double> weight, std::span<const double> bias,
                    int out_features, Matrix& out);

void linear_backward(Backend backend, const Matrix& in, std::span<const double> weight, const Matrix& grad_out,
                     Matrix* grad_in, std::span<double> grad_weight, std::span<double> grad_bias);

void relu_inplace(std::span<double> x);
/// grad *= (activation > 0), where activation is the ReLU output.
void relu_backward_inplace(std::span<const double> activation, std::span<double> grad);

/// Mean over spatial positions: (n, c, h, w) -> n x c.
void global_avg_pool(const Tensor4& in, Matrix& out);
void global_avg_pool_backward(const Matrix& grad_out, int h, int w, Tensor4& grad_in);

/// Row-wise softmax with max subtraction.
void softmax_rows(const Matrix& logits, Matrix& out);

}  // namespace sscc::kernels
