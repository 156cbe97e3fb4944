#pragma once

#include "sscc/kernels.hpp"

namespace sscc::kernels {

namespace serial {
void conv2d_forward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                    std::span<const double> bias, Tensor4& out);
void conv2d_backward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                     const Tensor4& grad_out, Tensor4* grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias);
void linear_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias,
                    int out_features, Matrix& out);
void linear_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias);
}  // namespace serial

namespace parallel {
void conv2d_forward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                    std::span<const double> bias, Tensor4& out);
void conv2d_backward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                     const Tensor4& grad_out, Tensor4* grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias);
void linear_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias,
                    int out_features, Matrix& out);
void linear_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias);
}  // namespace parallel

}  // namespace sscc::kernels
