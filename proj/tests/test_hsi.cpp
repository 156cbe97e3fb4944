#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "sscc/error.hpp"
#include "sscc/hsi.hpp"
#include "test_util.hpp"

using namespace sscc;

namespace {

Cube random_cube(std::uint32_t h, std::uint32_t w, std::uint32_t b, unsigned seed) {
  Cube c(h, w, b);
  std::mt19937 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  for (float& v : c.values) v = nd(rng);
  return c;
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

std::vector<unsigned char> header(const char* magic, std::uint32_t h, std::uint32_t w, std::uint32_t b) {
  std::vector<unsigned char> out(magic, magic + 4);
  for (std::uint32_t v : {h, w, b})
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
  return out;
}

}  // namespace

TEST_CASE("cube round trip and file layout") {
  testutil::TempDir dir;
  auto c = random_cube(3, 4, 5, 1);
  save_cube(c, dir.path / "c.ssc");
  CHECK(load_cube(dir.path / "c.ssc") == c);

  Cube one(1, 1, 1);
  save_cube(one, dir.path / "one.ssc");
  CHECK(std::filesystem::file_size(dir.path / "one.ssc") == 16 + 4);
  CHECK(load_cube(dir.path / "one.ssc") == one);
}

TEST_CASE("cube format errors") {
  testutil::TempDir dir;
  auto bad_magic = header("XXXX", 1, 1, 1);
  bad_magic.resize(bad_magic.size() + 4, 0);
  write_bytes(dir.path / "magic.ssc", bad_magic);
  CHECK_THROWS_AS(load_cube(dir.path / "magic.ssc"), FormatError);

  auto short_payload = header("SSC1", 2, 2, 3);
  short_payload.resize(short_payload.size() + 11 * 4, 0);
  write_bytes(dir.path / "short.ssc", short_payload);
  CHECK_THROWS_AS(load_cube(dir.path / "short.ssc"), FormatError);

  CHECK_THROWS_AS(load_cube(dir.path / "missing.ssc"), IoError);
  CHECK_THROWS_AS(save_cube(Cube(1, 1, 1), dir.path / "no" / "such" / "dir" / "c.ssc"), IoError);
}

TEST_CASE("label map round trip and validation") {
  testutil::TempDir dir;
  LabelMap m(2, 3, 4);
  m.at(0, 0) = 0;
  m.at(1, 2) = 3;
  save_labels(m, dir.path / "l.ssl");
  auto back = load_labels(dir.path / "l.ssl");
  CHECK(back == m);
  CHECK(back.labeled_count() == 2);
  m.at(0, 1) = 4;
  CHECK_THROWS(m.validate());
}

TEST_CASE("pca reconstructs an exact subspace") {
  // Spectra x = mean + a*u + b*v with orthonormal-free directions in 6 bands.
  Cube c(8, 8, 6);
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> ud(-1.0f, 1.0f);
  const float u[6] = {1, 2, 0, -1, 0.5f, 0};
  const float v[6] = {0, 1, 1, 1, -2, 0.25f};
  for (std::uint32_t y = 0; y < 8; ++y)
    for (std::uint32_t x = 0; x < 8; ++x) {
      const float a = ud(rng), b = ud(rng);
      for (int k = 0; k < 6; ++k) c.at(y, x, k) = 0.3f + a * u[k] + b * v[k];
    }
  auto model = pca_fit(c, 2);
  auto back = pca_inverse(model, pca_transform(model, c));
  double err = 0.0;
  for (std::size_t i = 0; i < c.values.size(); ++i) err = std::max(err, double(std::abs(back.values[i] - c.values[i])));
  CHECK(err < 1e-5);
}

TEST_CASE("pca components are orthonormal and sign-normalized") {
  auto c = random_cube(10, 10, 7, 4);
  auto model = pca_fit(c, 4);
  Eigen::MatrixXd gram = model.components * model.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-6);
  for (Eigen::Index r = 0; r < 4; ++r) {
    Eigen::Index idx;
    model.components.row(r).cwiseAbs().maxCoeff(&idx);
    CHECK(model.components(r, idx) >= 0.0);
    if (r > 0) CHECK(model.explained_variance(r) <= model.explained_variance(r - 1));
  }

  // Total explained variance is bounded by the covariance trace.
  Eigen::MatrixXd x(100, 7);
  for (int p = 0; p < 100; ++p)
    for (int b = 0; b < 7; ++b) x(p, b) = c.values[std::size_t(p) * 7 + b];
  Eigen::RowVectorXd mean = x.colwise().mean();
  const double trace = (x.rowwise() - mean).squaredNorm() / 100.0;
  CHECK(model.explained_variance.sum() <= trace + 1e-6);
  auto full = pca_fit(c, 7);
  CHECK(full.explained_variance.sum() == doctest::Approx(trace).epsilon(1e-6));
  auto back = pca_inverse(full, pca_transform(full, c));
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    err = std::max(err, double(std::abs(back.values[i] - c.values[i])));
    scale = std::max(scale, double(std::abs(c.values[i])));
  }
  CHECK(err / scale < 1e-5);
}

TEST_CASE("pca edge cases") {
  Cube constant(4, 4, 3);
  for (float& v : constant.values) v = 2.0f;
  auto model = pca_fit(constant, 1);
  REQUIRE(model.explained_variance.size() == 1);
  CHECK(model.explained_variance(0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(pca_fit(constant, 0), ConfigError);
  CHECK_THROWS_AS(pca_fit(constant, 4), ConfigError);

  auto c = random_cube(3, 3, 4, 5);
  auto fitted = pca_fit(c, 2);
  CHECK_THROWS_AS(pca_transform(fitted, random_cube(3, 3, 5, 1)), ConfigError);

  // A spectrum equal to the mean maps to zero.
  Cube at_mean(1, 1, 4);
  for (int b = 0; b < 4; ++b) at_mean.at(0, 0, b) = float(fitted.mean(b));
  auto z = pca_transform(fitted, at_mean);
  for (float v : z.values) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("pca transform arithmetic") {
  PcaModel m;
  m.mean = Eigen::VectorXd::Zero(2);
  m.components = Eigen::MatrixXd(1, 2);
  m.components << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  m.explained_variance = Eigen::VectorXd::Ones(1);
  Cube c(1, 1, 2);
  c.at(0, 0, 0) = 1.0f;
  c.at(0, 0, 1) = 3.0f;
  CHECK(pca_transform(m, c).at(0, 0, 0) == doctest::Approx(2.8284271).epsilon(1e-6));

  PcaModel id;
  id.mean = Eigen::VectorXd::Zero(3);
  id.components = Eigen::MatrixXd::Identity(3, 3);
  id.explained_variance = Eigen::VectorXd::Ones(3);
  auto r = random_cube(2, 2, 3, 8);
  CHECK(pca_transform(id, r) == r);
}

TEST_CASE("patch extraction") {
  auto c = random_cube(5, 5, 2, 6);
  auto ones = extract_patches(c, nullptr, 1);
  REQUIRE(ones.patches.size() == 25);
  for (int i = 0; i < 25; ++i) {
    const auto& p = ones.patches[i];
    CHECK(p.center_row == i / 5);
    CHECK(p.center_col == i % 5);
    for (int b = 0; b < 2; ++b) CHECK(p.at(0, 0, b) == double(c.at(i / 5, i % 5, b)));
  }

  auto corner = extract_patch(c, 0, 0, 3);
  CHECK(corner.at(0, 0, 0) == double(c.at(1, 1, 0)));
  CHECK(corner.at(1, 1, 1) == double(c.at(0, 0, 1)));
  CHECK(corner.at(2, 0, 0) == double(c.at(1, 1, 0)));

  // Interior patches copy the cube directly.
  auto inner = extract_patch(c, 2, 2, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) CHECK(inner.at(y, x, 0) == double(c.at(y, x, 0)));

  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(-3, 5) == 3);

  CHECK_THROWS_AS(extract_patches(c, nullptr, 4), ConfigError);
  CHECK_THROWS_AS(extract_patches(c, nullptr, 13), ConfigError);

  LabelMap labels(5, 5, 3);
  for (int i = 0; i < 10; ++i) labels.labels[std::size_t(i) * 2] = std::uint32_t(i % 3);
  auto set = extract_patches(c, &labels, 3);
  CHECK(set.patches.size() == 10);
  CHECK(set.labels.size() == 10);
  CHECK(set.labels[4] == 1);
}

TEST_CASE("synthetic scenes") {
  auto a = synth_cube(4, 32, 32, 16, 0.05, 11);
  auto b = synth_cube(4, 32, 32, 16, 0.05, 11);
  CHECK(a.cube == b.cube);
  CHECK(a.labels == b.labels);
  CHECK(a.labels.labeled_count() == 32 * 32);

  // Class means are far apart relative to the noise.
  std::vector<std::vector<double>> mean(4, std::vector<double>(16, 0.0));
  std::vector<int> count(4, 0);
  for (std::uint32_t y = 0; y < 32; ++y)
    for (std::uint32_t x = 0; x < 32; ++x) {
      const auto l = a.labels.at(y, x);
      ++count[l];
      for (int k = 0; k < 16; ++k) mean[l][k] += a.cube.at(y, x, k);
    }
  for (int c = 0; c < 4; ++c) {
    REQUIRE(count[c] > 0);
    for (double& v : mean[c]) v /= count[c];
  }
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      double d = 0.0;
      for (int k = 0; k < 16; ++k) d += (mean[i][k] - mean[j][k]) * (mean[i][k] - mean[j][k]);
      CHECK(std::sqrt(d) > 10 * 0.05);
    }

  auto clean = synth_cube(3, 10, 10, 5, 0.0, 2);
  for (std::uint32_t y = 0; y < 10; ++y)
    for (std::uint32_t x = 0; x < 10; ++x)
      for (std::uint32_t y2 = 0; y2 < 10; ++y2)
        for (std::uint32_t x2 = 0; x2 < 10; ++x2)
          if (clean.labels.at(y, x) == clean.labels.at(y2, x2))
            for (int k = 0; k < 5; ++k) REQUIRE(clean.cube.at(y, x, k) == clean.cube.at(y2, x2, k));

  CHECK_THROWS_AS(synth_cube(10, 3, 3, 4, 0.0, 1), ConfigError);
  CHECK(synth_cube(4, 32, 32, 16, 0.05, 12).cube != a.cube);
}
