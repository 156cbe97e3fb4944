#include "sscc/hsi.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "sscc/error.hpp"
#include "sscc/random.hpp"

namespace sscc {

namespace {

constexpr std::string_view kCubeMagic = "SSC1";
constexpr std::string_view kLabelMagic = "SSL1";

std::uint32_t decode_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

std::string dims_string(std::uint64_t h, std::uint64_t w, std::uint64_t b) {
  return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(b);
}

}  // namespace

void Cube::validate() const {
  if (height == 0 || width == 0 || bands == 0)
    throw ConfigError("cube dims must be positive, got " + dims_string(height, width, bands));
  if (values.size() != std::size_t{height} * width * bands)
    throw ConfigError("cube payload size does not match dims " + dims_string(height, width, bands));
  for (float v : values)
    if (!std::isfinite(v)) throw ConfigError("cube contains a non-finite value");
}

std::size_t LabelMap::labeled_count() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](std::uint32_t l) { return l != kUnlabeled; }));
}

void LabelMap::validate() const {
  if (height == 0 || width == 0) throw ConfigError("label map dims must be positive");
  if (labels.size() != std::size_t{height} * width) throw ConfigError("label map payload size mismatch");
  for (auto l : labels)
    if (l != kUnlabeled && l >= classes)
      throw ConfigError("label " + std::to_string(l) + " out of range for " + std::to_string(classes) +
                        " classes");
}

// ---------------------------------------------------------------------------
// File IO

Cube load_cube(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  if (in.remaining() < 16) throw FormatError("file too short for a cube header: " + path.string());
  if (in.bytes(4) != kCubeMagic) throw FormatError("bad magic in cube file: " + path.string());
  Cube cube;
  cube.height = in.u32();
  cube.width = in.u32();
  cube.bands = in.u32();
  const std::uint64_t count = std::uint64_t{cube.height} * cube.width * cube.bands;
  const std::uint64_t payload = in.remaining();
  if (payload != count * 4)
    throw FormatError("cube header " + dims_string(cube.height, cube.width, cube.bands) + " expects " +
                      std::to_string(count) + " floats but payload holds " + std::to_string(payload / 4) +
                      (payload % 4 ? " (plus stray bytes)" : ""));
  auto raw = in.bytes(static_cast<std::size_t>(payload));
  cube.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) cube.values[i] = std::bit_cast<float>(decode_u32(raw.data() + 4 * i));
  return cube;
}

void save_cube(const Cube& cube, const std::filesystem::path& path) {
  if (cube.values.size() != std::size_t{cube.height} * cube.width * cube.bands)
    throw ConfigError("cube payload size does not match dims");
  detail::BinaryWriter out(path);
  out.bytes(kCubeMagic);
  out.u32(cube.height);
  out.u32(cube.width);
  out.u32(cube.bands);
  for (float v : cube.values) out.f32(v);
  out.finish();
}

LabelMap load_labels(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  if (in.remaining() < 16) throw FormatError("file too short for a label header: " + path.string());
  if (in.bytes(4) != kLabelMagic) throw FormatError("bad magic in label file: " + path.string());
  LabelMap map;
  map.height = in.u32();
  map.width = in.u32();
  map.classes = in.u32();
  const std::uint64_t count = std::uint64_t{map.height} * map.width;
  const std::uint64_t payload = in.remaining();
  if (payload != count * 4)
    throw FormatError("label header " + std::to_string(map.height) + "x" + std::to_string(map.width) +
                      " expects " + std::to_string(count) + " labels but payload holds " +
                      std::to_string(payload / 4));
  auto raw = in.bytes(static_cast<std::size_t>(payload));
  map.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) map.labels[i] = decode_u32(raw.data() + 4 * i);
  map.validate();
  return map;
}

void save_labels(const LabelMap& labels, const std::filesystem::path& path) {
  labels.validate();
  detail::BinaryWriter out(path);
  out.bytes(kLabelMagic);
  out.u32(labels.height);
  out.u32(labels.width);
  out.u32(labels.classes);
  for (auto l : labels.labels) out.u32(l);
  out.finish();
}

// ---------------------------------------------------------------------------
// PCA

PcaModel pca_fit(const Cube& cube, int k) {
  cube.validate();
  const int b = static_cast<int>(cube.bands);
  const auto n = static_cast<Eigen::Index>(cube.pixel_count());
  if (k < 1 || k > b || k > n)
    throw ConfigError("pca component count " + std::to_string(k) + " outside [1, min(bands, pixels)]");

  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> raw(
      cube.values.data(), n, b);
  Eigen::MatrixXd x = raw.cast<double>();
  Eigen::VectorXd mean = x.colwise().mean().transpose();
  x.rowwise() -= mean.transpose();
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("covariance eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  PcaModel model;
  model.mean = mean;
  model.components.resize(k, b);
  model.explained_variance.resize(k);
  for (int i = 0; i < k; ++i) {
    const int src = b - 1 - i;
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v(argmax) < 0) v = -v;
    model.components.row(i) = v.transpose();
    model.explained_variance(i) = std::max(0.0, eig.eigenvalues()(src));
  }
  return model;
}

Cube pca_transform(const PcaModel& model, const Cube& cube) {
  if (static_cast<int>(cube.bands) != model.input_bands())
    throw ConfigError("pca model expects " + std::to_string(model.input_bands()) + " bands, cube has " +
                      std::to_string(cube.bands));
  const int k = model.output_bands();
  Cube out(cube.height, cube.width, static_cast<std::uint32_t>(k));
  Eigen::VectorXd centered(cube.bands);
  for (std::size_t p = 0; p < cube.pixel_count(); ++p) {
    const float* s = cube.values.data() + p * cube.bands;
    for (std::uint32_t j = 0; j < cube.bands; ++j) centered(j) = double(s[j]) - model.mean(j);
    Eigen::VectorXd proj = model.components * centered;
    for (int i = 0; i < k; ++i) out.values[p * k + i] = static_cast<float>(proj(i));
  }
  return out;
}

Cube pca_inverse(const PcaModel& model, const Cube& reduced) {
  if (static_cast<int>(reduced.bands) != model.output_bands())
    throw ConfigError("reduced cube band count does not match the pca model");
  const int b = model.input_bands();
  Cube out(reduced.height, reduced.width, static_cast<std::uint32_t>(b));
  Eigen::VectorXd code(reduced.bands);
  for (std::size_t p = 0; p < reduced.pixel_count(); ++p) {
    for (std::uint32_t j = 0; j < reduced.bands; ++j) code(j) = reduced.values[p * reduced.bands + j];
    Eigen::VectorXd spec = model.components.transpose() * code + model.mean;
    for (int i = 0; i < b; ++i) out.values[p * b + i] = static_cast<float>(spec(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Patches

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

void check_patch_side(const Cube& cube, int side) {
  if (side < 1 || side % 2 == 0) throw ConfigError("patch side must be a positive odd number, got " + std::to_string(side));
  const auto limit = 2 * std::min(cube.height, cube.width);
  if (static_cast<std::uint32_t>(side) > limit)
    throw ConfigError("patch side " + std::to_string(side) + " too large for mirror padding of a " +
                      std::to_string(cube.height) + "x" + std::to_string(cube.width) + " cube");
}

}  // namespace

Patch extract_patch(const Cube& cube, int row, int col, int side) {
  check_patch_side(cube, side);
  const int half = side / 2;
  const int h = static_cast<int>(cube.height);
  const int w = static_cast<int>(cube.width);
  const int c = static_cast<int>(cube.bands);
  Patch patch(side, c);
  patch.center_row = row;
  patch.center_col = col;
  for (int dr = 0; dr < side; ++dr) {
    const int r = reflect_index(row - half + dr, h);
    for (int dc = 0; dc < side; ++dc) {
      const int cc = reflect_index(col - half + dc, w);
      auto spec = cube.spectrum(r, cc);
      for (int b = 0; b < c; ++b) patch.at(dr, dc, b) = spec[b];
    }
  }
  return patch;
}

PatchSet extract_patches(const Cube& cube, const LabelMap* labels, int side) {
  check_patch_side(cube, side);
  if (labels && (labels->height != cube.height || labels->width != cube.width))
    throw ConfigError("label map dims do not match the cube");
  PatchSet set;
  for (std::uint32_t r = 0; r < cube.height; ++r) {
    for (std::uint32_t c = 0; c < cube.width; ++c) {
      if (labels) {
        const auto l = labels->at(r, c);
        if (l == kUnlabeled) continue;
        set.labels.push_back(l);
      }
      set.patches.push_back(extract_patch(cube, static_cast<int>(r), static_cast<int>(c), side));
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

std::vector<double> smooth_signature(Rng& rng, int bands) {
  std::vector<double> sig(bands, uniform(rng, 0.2, 0.6));
  const double span = std::max(1.0, double(bands - 1));
  for (int bump = 0; bump < 3; ++bump) {
    const double centre = uniform(rng, 0.0, span);
    const double width = uniform(rng, span / 8.0 + 0.5, span / 3.0 + 1.0);
    const double amplitude = uniform(rng, -0.3, 0.3);
    for (int b = 0; b < bands; ++b) {
      const double d = (b - centre) / width;
      sig[b] += amplitude * std::exp(-0.5 * d * d);
    }
  }
  for (double& v : sig) v = std::clamp(v, 0.02, 1.0);
  return sig;
}

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

SyntheticScene synth_cube(int classes, int height, int width, int bands, double noise_sigma,
                          std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synthetic scene needs at least 2 classes");
  if (height < 1 || width < 1 || bands < 1) throw ConfigError("synthetic scene dims must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise sigma must be finite and >= 0");
  const auto pixels = std::int64_t{height} * width;
  if (classes > pixels) throw ConfigError("more classes than pixels");

  Rng layout_rng = make_rng(seed, Stream::synth, {0});
  Rng spectra_rng = make_rng(seed, Stream::synth, {1});
  Rng noise_rng = make_rng(seed, Stream::synth, {2});

  // Region sites on a jittered grid, one per class, on distinct pixels.
  const int grid_rows = static_cast<int>(std::ceil(std::sqrt(double(classes))));
  const int grid_cols = (classes + grid_rows - 1) / grid_rows;
  const double cell_h = double(height) / grid_rows;
  const double cell_w = double(width) / grid_cols;
  std::vector<std::int64_t> sites;
  for (int k = 0; k < classes; ++k) {
    const double r = (k / grid_cols + 0.5 + uniform(layout_rng, -0.25, 0.25)) * cell_h;
    const double c = (k % grid_cols + 0.5 + uniform(layout_rng, -0.25, 0.25)) * cell_w;
    const auto ri = std::clamp<std::int64_t>(std::llround(r - 0.5), 0, height - 1);
    const auto ci = std::clamp<std::int64_t>(std::llround(c - 0.5), 0, width - 1);
    std::int64_t site = ri * width + ci;
    while (std::find(sites.begin(), sites.end(), site) != sites.end())
      site = std::uniform_int_distribution<std::int64_t>(0, pixels - 1)(layout_rng);
    sites.push_back(site);
  }

  SyntheticScene scene{Cube(height, width, bands), LabelMap(height, width, classes)};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      std::uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < classes; ++k) {
        const double dr = double(r - sites[k] / width);
        const double dc = double(c - sites[k] % width);
        const double d = dr * dr + dc * dc;
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::uint32_t>(k);
        }
      }
      scene.labels.at(r, c) = best;
    }
  }

  // Signatures drawn by rejection so classes stay spectrally apart.
  const double min_separation = 0.15 * std::sqrt(double(bands));
  std::vector<std::vector<double>> signatures;
  for (int k = 0; k < classes; ++k) {
    std::vector<double> best;
    double best_gap = -1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      auto candidate = smooth_signature(spectra_rng, bands);
      double gap = std::numeric_limits<double>::infinity();
      for (const auto& s : signatures) gap = std::min(gap, l2_distance(s, candidate));
      if (gap > best_gap) {
        best_gap = gap;
        best = std::move(candidate);
      }
      if (best_gap >= min_separation) break;
    }
    signatures.push_back(std::move(best));
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const auto& sig = signatures[scene.labels.at(r, c)];
      for (int b = 0; b < bands; ++b) {
        const double n = noise_sigma > 0.0 ? noise_sigma * noise(noise_rng) : 0.0;
        scene.cube.at(r, c, b) = static_cast<float>(sig[b] + n);
      }
    }
  }
  return scene;
}

}  // namespace sscc
