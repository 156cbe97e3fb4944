#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace sscc {

/// Row-major dense matrix used for batches of vectors (one row per sample).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Dense NCHW activation tensor.
struct Tensor4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(std::size_t(n_) * c_ * h_ * w_, 0.0) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return std::size_t(h) * w; }
  std::size_t sample_stride() const { return std::size_t(c) * h * w; }
  std::size_t index(int in, int ic, int ih, int iw) const {
    return ((std::size_t(in) * c + ic) * h + ih) * w + iw;
  }
  double& at(int in, int ic, int ih, int iw) { return data[index(in, ic, ih, iw)]; }
  double at(int in, int ic, int ih, int iw) const { return data[index(in, ic, ih, iw)]; }
  double* sample(int in) { return data.data() + std::size_t(in) * sample_stride(); }
  const double* sample(int in) const { return data.data() + std::size_t(in) * sample_stride(); }
};

}  // namespace sscc
