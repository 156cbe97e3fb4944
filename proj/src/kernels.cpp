#include <algorithm>
#include <cmath>

#include "kernels_impl.hpp"

namespace sscc::kernels {

void conv2d_forward(Backend backend, const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                    std::span<const double> bias, Tensor4& out) {
  if (backend == Backend::serial)
    serial::conv2d_forward(g, in, weight, bias, out);
  else
    parallel::conv2d_forward(g, in, weight, bias, out);
}

void conv2d_backward(Backend backend, const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                     const Tensor4& grad_out, Tensor4* grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  if (backend == Backend::serial)
    serial::conv2d_backward(g, in, weight, grad_out, grad_in, grad_weight, grad_bias);
  else
    parallel::conv2d_backward(g, in, weight, grad_out, grad_in, grad_weight, grad_bias);
}

void linear_forward(Backend backend, const Matrix& in, std::span<const double> weight, std::span<const double> bias,
                    int out_features, Matrix& out) {
  if (backend == Backend::serial)
    serial::linear_forward(in, weight, bias, out_features, out);
  else
    parallel::linear_forward(in, weight, bias, out_features, out);
}

void linear_backward(Backend backend, const Matrix& in, std::span<const double> weight, const Matrix& grad_out,
                     Matrix* grad_in, std::span<double> grad_weight, std::span<double> grad_bias) {
  if (backend == Backend::serial)
    serial::linear_backward(in, weight, grad_out, grad_in, grad_weight, grad_bias);
  else
    parallel::linear_backward(in, weight, grad_out, grad_in, grad_weight, grad_bias);
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void relu_backward_inplace(std::span<const double> activation, std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(activation[i] > 0.0)) grad[i] = 0.0;
}

void global_avg_pool(const Tensor4& in, Matrix& out) {
  out.resize(in.n, in.c);
  const auto plane = in.plane();
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) {
      const double* p = in.sample(n) + c * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out(n, c) = acc / double(plane);
    }
}

void global_avg_pool_backward(const Matrix& grad_out, int h, int w, Tensor4& grad_in) {
  grad_in = Tensor4(static_cast<int>(grad_out.rows()), static_cast<int>(grad_out.cols()), h, w);
  const auto plane = grad_in.plane();
  for (int n = 0; n < grad_in.n; ++n)
    for (int c = 0; c < grad_in.c; ++c) {
      const double g = grad_out(n, c) / double(plane);
      std::fill_n(grad_in.sample(n) + c * plane, plane, g);
    }
}

void softmax_rows(const Matrix& logits, Matrix& out) {
  out.resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    double total = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      out(r, c) = std::exp(logits(r, c) - m);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
}

}  // namespace sscc::kernels
