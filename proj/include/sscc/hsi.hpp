#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sscc {

/// Label value marking a pixel without ground truth.
inline constexpr std::uint32_t kUnlabeled = std::numeric_limits<std::uint32_t>::max();

/// Hyperspectral image, stored row-major as (row, col, band).
struct Cube {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t bands = 0;
  std::vector<float> values;

  Cube() = default;
  Cube(std::uint32_t h, std::uint32_t w, std::uint32_t b)
      : height(h), width(w), bands(b), values(std::size_t{h} * w * b, 0.0f) {}

  std::size_t pixel_count() const { return std::size_t{height} * width; }
  std::size_t index(std::size_t row, std::size_t col, std::size_t band) const {
    return (row * width + col) * bands + band;
  }
  float& at(std::size_t row, std::size_t col, std::size_t band) { return values[index(row, col, band)]; }
  float at(std::size_t row, std::size_t col, std::size_t band) const { return values[index(row, col, band)]; }

  std::span<const float> spectrum(std::size_t row, std::size_t col) const {
    return {values.data() + index(row, col, 0), bands};
  }
  std::span<float> spectrum(std::size_t row, std::size_t col) {
    return {values.data() + index(row, col, 0), bands};
  }

  /// Throws ConfigError on zero dims, size mismatch or non-finite values.
  void validate() const;

  bool operator==(const Cube&) const = default;
};

/// Per-pixel ground truth. Entries are < classes or kUnlabeled.
struct LabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t classes = 0;
  std::vector<std::uint32_t> labels;

  LabelMap() = default;
  LabelMap(std::uint32_t h, std::uint32_t w, std::uint32_t c)
      : height(h), width(w), classes(c), labels(std::size_t{h} * w, kUnlabeled) {}

  std::uint32_t& at(std::size_t row, std::size_t col) { return labels[row * width + col]; }
  std::uint32_t at(std::size_t row, std::size_t col) const { return labels[row * width + col]; }
  std::size_t labeled_count() const;
  void validate() const;

  bool operator==(const LabelMap&) const = default;
};

/// A square spatial window of a cube, stored as (row, col, channel).
struct Patch {
  int side = 0;
  int channels = 0;
  std::vector<double> values;
  int center_row = 0;
  int center_col = 0;

  Patch() = default;
  Patch(int s, int c) : side(s), channels(c), values(std::size_t(s) * s * c, 0.0) {}

  std::size_t index(int row, int col, int ch) const {
    return (std::size_t(row) * side + col) * channels + ch;
  }
  double& at(int row, int col, int ch) { return values[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return values[index(row, col, ch)]; }

  bool operator==(const Patch&) const = default;
};

struct PcaModel {
  Eigen::VectorXd mean;                // length b
  Eigen::MatrixXd components;          // k x b, orthonormal rows
  Eigen::VectorXd explained_variance;  // length k, non-increasing

  int input_bands() const { return static_cast<int>(mean.size()); }
  int output_bands() const { return static_cast<int>(components.rows()); }
};

struct PatchSet {
  std::vector<Patch> patches;
  /// Ground truth aligned with patches; empty when no label map was given.
  std::vector<std::uint32_t> labels;
};

Cube load_cube(const std::filesystem::path& path);
void save_cube(const Cube& cube, const std::filesystem::path& path);
LabelMap load_labels(const std::filesystem::path& path);
void save_labels(const LabelMap& labels, const std::filesystem::path& path);

/// Top-k principal components of the band covariance over all pixels.
/// Components are sign-normalized so the largest-magnitude entry is >= 0.
PcaModel pca_fit(const Cube& cube, int k);
Cube pca_transform(const PcaModel& model, const Cube& cube);
/// Maps a transformed cube back to the original band space.
Cube pca_inverse(const PcaModel& model, const Cube& reduced);

/// Mirror index without edge duplication: -1 -> 1, n -> n-2.
int reflect_index(int i, int n);

Patch extract_patch(const Cube& cube, int row, int col, int side);

/// One patch per pixel in row-major order, or one per labeled pixel when a
/// label map is supplied. Borders are mirror padded.
PatchSet extract_patches(const Cube& cube, const LabelMap* labels, int side);

struct SyntheticScene {
  Cube cube;
  LabelMap labels;
};

/// Piecewise-constant scene of `classes` contiguous regions (Voronoi cells of
/// jittered grid sites), each with its own smooth spectral signature, plus
/// i.i.d. Gaussian noise. Pure function of its arguments.
SyntheticScene synth_cube(int classes, int height, int width, int bands, double noise_sigma,
                          std::uint64_t seed);

}  // namespace sscc
