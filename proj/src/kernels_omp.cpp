// OpenMP kernels: im2col + dense products, threads over samples or over
// fixed-size output-channel blocks.

#include <algorithm>
#include <vector>

#include "kernels_impl.hpp"

namespace sscc::kernels::parallel {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Row block for weight-gradient products. Fixed so the summation order does
// not follow the thread count.
constexpr int kRowBlock = 16;
constexpr int kSampleChunk = 64;

/// col is (in_channels * k * k) x (ho * wo).
void im2col(const ConvGeometry& g, const double* in, int h, int w, int ho, int wo, double* col) {
  const int k = g.kernel;
  const std::size_t p_count = std::size_t(ho) * wo;
  for (int ic = 0; ic < g.in_channels; ++ic)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = col + ((std::size_t(ic) * k + ky) * k + kx) * p_count;
        for (int y = 0; y < ho; ++y) {
          const int iy = y * g.stride + ky - g.pad;
          for (int x = 0; x < wo; ++x) {
            const int ix = x * g.stride + kx - g.pad;
            row[y * wo + x] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? in[(std::size_t(ic) * h + iy) * w + ix] : 0.0;
          }
        }
      }
}

void col2im_add(const ConvGeometry& g, const double* col, int h, int w, int ho, int wo, double* out) {
  const int k = g.kernel;
  const std::size_t p_count = std::size_t(ho) * wo;
  for (int ic = 0; ic < g.in_channels; ++ic)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row = col + ((std::size_t(ic) * k + ky) * k + kx) * p_count;
        for (int y = 0; y < ho; ++y) {
          const int iy = y * g.stride + ky - g.pad;
          if (iy < 0 || iy >= h) continue;
          for (int x = 0; x < wo; ++x) {
            const int ix = x * g.stride + kx - g.pad;
            if (ix < 0 || ix >= w) continue;
            out[(std::size_t(ic) * h + iy) * w + ix] += row[y * wo + x];
          }
        }
      }
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                    std::span<const double> bias, Tensor4& out) {
  const int ho = g.out_size(in.h);
  const int wo = g.out_size(in.w);
  out = Tensor4(in.n, g.out_channels, ho, wo);
  const int rows = g.in_channels * g.kernel * g.kernel;
  const int p_count = ho * wo;
  ConstRowMap w(weight.data(), g.out_channels, rows);
  Eigen::Map<const Eigen::VectorXd> b(bias.data(), g.out_channels);

#pragma omp parallel
  {
    std::vector<double> col(std::size_t(rows) * p_count);
#pragma omp for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      im2col(g, in.sample(n), in.h, in.w, ho, wo, col.data());
      RowMap o(out.sample(n), g.out_channels, p_count);
      o.noalias() = w * ConstRowMap(col.data(), rows, p_count);
      o.colwise() += b;
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const Tensor4& in, std::span<const double> weight,
                     const Tensor4& grad_out, Tensor4* grad_in, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  const int ho = grad_out.h;
  const int wo = grad_out.w;
  const int rows = g.in_channels * g.kernel * g.kernel;
  const int p_count = ho * wo;
  ConstRowMap w(weight.data(), g.out_channels, rows);
  RowMap gw(grad_weight.data(), g.out_channels, rows);
  gw.setZero();

  for (int oc = 0; oc < g.out_channels; ++oc) {
    double acc = 0.0;
    for (int n = 0; n < grad_out.n; ++n) {
      const double* go = grad_out.sample(n) + std::size_t(oc) * p_count;
      for (int p = 0; p < p_count; ++p) acc += go[p];
    }
    grad_bias[oc] = acc;
  }

  if (grad_in) {
    *grad_in = Tensor4(in.n, in.c, in.h, in.w);
#pragma omp parallel
    {
      std::vector<double> gcol(std::size_t(rows) * p_count);
#pragma omp for schedule(static)
      for (int n = 0; n < in.n; ++n) {
        RowMap gc(gcol.data(), rows, p_count);
        gc.noalias() = w.transpose() * ConstRowMap(grad_out.sample(n), g.out_channels, p_count);
        col2im_add(g, gcol.data(), in.h, in.w, ho, wo, grad_in->sample(n));
      }
    }
  }

  // Weight gradient: sum over samples of G_n * col_n^T, in fixed sample chunks.
  const int chunk_max = std::min(kSampleChunk, std::max(1, in.n));
  RowMat cols(rows, std::size_t(chunk_max) * p_count);
  RowMat gchunk(g.out_channels, std::size_t(chunk_max) * p_count);
  const int blocks = (g.out_channels + kRowBlock - 1) / kRowBlock;
  for (int n0 = 0; n0 < in.n; n0 += chunk_max) {
    const int len = std::min(chunk_max, in.n - n0);
    const Eigen::Index width = Eigen::Index(len) * p_count;
#pragma omp parallel
    {
      std::vector<double> col(std::size_t(rows) * p_count);
#pragma omp for schedule(static)
      for (int j = 0; j < len; ++j) {
        im2col(g, in.sample(n0 + j), in.h, in.w, ho, wo, col.data());
        cols.middleCols(Eigen::Index(j) * p_count, p_count) = ConstRowMap(col.data(), rows, p_count);
        gchunk.middleCols(Eigen::Index(j) * p_count, p_count) =
            ConstRowMap(grad_out.sample(n0 + j), g.out_channels, p_count);
      }
    }
#pragma omp parallel for schedule(static)
    for (int blk = 0; blk < blocks; ++blk) {
      const int r0 = blk * kRowBlock;
      const int rn = std::min(kRowBlock, g.out_channels - r0);
      gw.middleRows(r0, rn).noalias() +=
          gchunk.block(r0, 0, rn, width) * cols.leftCols(width).transpose();
    }
  }
}

void linear_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias,
                    int out_features, Matrix& out) {
  const auto in_features = in.cols();
  ConstRowMap w(weight.data(), out_features, in_features);
  Eigen::Map<const Eigen::VectorXd> b(bias.data(), out_features);
  out.resize(in.rows(), out_features);
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    Eigen::VectorXd x = in.row(r).transpose();
    Eigen::VectorXd y = w * x + b;
    out.row(r) = y.transpose();
  }
}

void linear_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                     std::span<double> grad_weight, std::span<double> grad_bias) {
  const auto in_features = in.cols();
  const auto out_features = static_cast<int>(grad_out.cols());
  ConstRowMap w(weight.data(), out_features, in_features);
  RowMap gw(grad_weight.data(), out_features, in_features);
  Eigen::Map<Eigen::VectorXd> gb(grad_bias.data(), out_features);
  gb = grad_out.colwise().sum().transpose();

  if (grad_in) {
    grad_in->resize(in.rows(), in_features);
#pragma omp parallel for schedule(static)
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
      Eigen::VectorXd g = grad_out.row(r).transpose();
      Eigen::VectorXd x = w.transpose() * g;
      grad_in->row(r) = x.transpose();
    }
  }

  const int blocks = (out_features + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int r0 = blk * kRowBlock;
    const int rn = std::min(kRowBlock, out_features - r0);
    gw.middleRows(r0, rn).noalias() = grad_out.middleCols(r0, rn).transpose() * in;
  }
}

}  // namespace sscc::kernels::parallel
