// Reference kernels: direct loops, no blocking, no threads.

#include <algorithm>

#include "kernels_impl.hpp"

namespace sscc::kernels::serial {

void conv2d_forward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                    std::span<const double> bias, Tensor4& out) {
  const int ho = g.out_size(in.h);
  const int wo = g.out_size(in.w);
  out = Tensor4(in.n, g.out_channels, ho, wo);
  const int k = g.kernel;
  for (int n = 0; n < in.n; ++n)
    for (int oc = 0; oc < g.out_channels; ++oc)
      for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
          double acc = bias[oc];
          for (int ic = 0; ic < g.in_channels; ++ic)
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y * g.stride + ky - g.pad;
              if (iy < 0 || iy >= in.h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x * g.stride + kx - g.pad;
                if (ix < 0 || ix >= in.w) continue;
                acc += weight[((std::size_t(oc) * g.in_channels + ic) * k + ky) * k + kx] * in.at(n, ic, iy, ix);
              }
            }
          out.at(n, oc, y, x) = acc;
        }
}

void conv2d_backward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                     const Tensor4& grad_out, Tensor4* grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  const int k = g.kernel;
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  if (grad_in) *grad_in = Tensor4(in.n, in.c, in.h, in.w);
  for (int n = 0; n < in.n; ++n)
    for (int oc = 0; oc < g.out_channels; ++oc)
      for (int y = 0; y < grad_out.h; ++y)
        for (int x = 0; x < grad_out.w; ++x) {
          const double go = grad_out.at(n, oc, y, x);
          grad_bias[oc] += go;
          for (int ic = 0; ic < g.in_channels; ++ic)
            for (int ky = 0; ky < k; ++ky) {
              const int iy = y * g.stride + ky - g.pad;
              if (iy < 0 || iy >= in.h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix = x * g.stride + kx - g.pad;
                if (ix < 0 || ix >= in.w) continue;
                const std::size_t wi = ((std::size_t(oc) * g.in_channels + ic) * k + ky) * k + kx;
                grad_weight[wi] += go * in.at(n, ic, iy, ix);
                if (grad_in) grad_in->at(n, ic, iy, ix) += go * weight[wi];
              }
            }
        }
}

void linear_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias,
                    int out_features, Matrix& out) {
  const auto in_features = in.cols();
  out.resize(in.rows(), out_features);
  for (Eigen::Index r = 0; r < in.rows(); ++r)
    for (int o = 0; o < out_features; ++o) {
      double acc = bias[o];
      for (Eigen::Index i = 0; i < in_features; ++i) acc += weight[o * in_features + i] * in(r, i);
      out(r, o) = acc;
    }
}

void linear_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const auto in_features = in.cols();
  const auto out_features = grad_out.cols();
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  if (grad_in) grad_in->setZero(in.rows(), in_features);
  for (Eigen::Index r = 0; r < in.rows(); ++r)
    for (Eigen::Index o = 0; o < out_features; ++o) {
      const double go = grad_out(r, o);
      grad_bias[o] += go;
      for (Eigen::Index i = 0; i < in_features; ++i) {
        grad_weight[o * in_features + i] += go * in(r, i);
        if (grad_in) (*grad_in)(r, i) += go * weight[o * in_features + i];
      }
    }
}

}  // namespace sscc::kernels::serial
