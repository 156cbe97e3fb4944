#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sscc/augment.hpp"
#include "sscc/error.hpp"
#include "test_util.hpp"

using namespace sscc;

namespace {

Patch sample_patch(int side = 7, int channels = 8, unsigned seed = 1) {
  return testutil::random_patches(1, side, channels, seed)[0];
}

Transform make(TransformKind kind) {
  Transform t;
  t.kind = kind;
  return t;
}

double max_diff(const Patch& a, const Patch& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
  return d;
}

}  // namespace

TEST_CASE("transform names round trip") {
  for (auto k : kAllTransforms) CHECK(parse_transform(transform_name(k)) == k);
  CHECK_FALSE(parse_transform("sharpen").has_value());
  CHECK(is_spectral(TransformKind::erase_band));
  CHECK(is_spectral(TransformKind::permute_band));
  CHECK_FALSE(is_spectral(TransformKind::flip));
}

TEST_CASE("plans preserve shape") {
  AugmentationPool all;
  for (auto k : kAllTransforms) all.entry(k).probability = 1.0;
  all.spectral_prob = 1.0;
  for (int side : {3, 5, 9, 13})
    for (int seed = 0; seed < 25; ++seed) {
      auto rng = make_rng(seed, Stream::view, {std::uint64_t(side)});
      auto p = sample_patch(side, 6, seed);
      auto plan = sample_plan(side == 3 ? AugmentationPool::identity() : all, rng);
      auto out = apply_plan(plan, p);
      CHECK(out.side == p.side);
      CHECK(out.channels == p.channels);
      CHECK(out.values.size() == p.values.size());
      CHECK(out.center_row == p.center_row);
    }
}

TEST_CASE("sampling extremes and determinism") {
  auto rng = make_rng(1, Stream::view);
  for (int i = 0; i < 100; ++i) CHECK(sample_plan(AugmentationPool::identity(), rng).empty());

  AugmentationPool all;
  for (auto k : kAllTransforms) all.entry(k).probability = 1.0;
  all.spectral_prob = 1.0;
  auto r1 = make_rng(5, Stream::view);
  auto r2 = make_rng(5, Stream::view);
  auto p1 = sample_plan(all, r1);
  auto p2 = sample_plan(all, r2);
  CHECK(p1.steps.size() == kAllTransforms.size());
  auto patch = sample_patch(9, 8, 2);
  CHECK(apply_plan(p1, patch) == apply_plan(p2, patch));
  CHECK(apply_plan(p1, patch) == apply_plan(p1, patch));

  AugmentationPool disabled = all;
  disabled.flip.enabled = false;
  auto r3 = make_rng(5, Stream::view);
  CHECK_FALSE(sample_plan(disabled, r3).contains(TransformKind::flip));
}

TEST_CASE("flip and rotation identities") {
  auto p = sample_patch();
  auto h = make(TransformKind::flip);
  h.flip_horizontal = true;
  CHECK(apply_transform(h, apply_transform(h, p)) == p);
  CHECK(apply_transform(h, p) != p);
  auto v = make(TransformKind::flip);
  v.flip_vertical = true;
  CHECK(apply_transform(v, apply_transform(v, p)) == p);
  CHECK(apply_transform(h, p).at(0, 0, 0) == p.at(0, 6, 0));
  CHECK(apply_transform(v, p).at(0, 0, 0) == p.at(6, 0, 0));

  auto r90 = make(TransformKind::rotate);
  r90.quarter_turns = 1;
  Patch q = p;
  for (int i = 0; i < 4; ++i) q = apply_transform(r90, q);
  CHECK(q == p);
  CHECK(apply_transform(r90, p) != p);
  auto r180 = make(TransformKind::rotate);
  r180.quarter_turns = 2;
  CHECK(apply_transform(r180, apply_transform(r180, p)) == p);
  // Counter-clockwise: the top-right corner moves to the top-left.
  CHECK(apply_transform(r90, p).at(0, 0, 1) == p.at(0, 6, 1));

  AugmentationPlan plan;
  plan.steps = {h, h};
  CHECK(apply_plan(plan, p) == p);
}

TEST_CASE("band permutation keeps each pixel's multiset and group order") {
  auto p = sample_patch(5, 8, 3);
  auto t = make(TransformKind::permute_band);
  t.groups = 4;
  bool changed = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    t.seed = seed;
    auto out = apply_transform(t, p);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        std::vector<double> a, b;
        for (int c = 0; c < 8; ++c) {
          a.push_back(p.at(y, x, c));
          b.push_back(out.at(y, x, c));
        }
        // Adjacent pairs stay together.
        for (int g = 0; g < 4; ++g) {
          const auto it = std::find(a.begin(), a.end(), b[2 * g]);
          REQUIRE(it != a.end());
          const auto idx = it - a.begin();
          CHECK(idx % 2 == 0);
          CHECK(a[idx + 1] == b[2 * g + 1]);
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
      }
    changed = changed || out != p;
  }
  CHECK(changed);
}

TEST_CASE("blur with tiny sigma is nearly the identity") {
  auto p = sample_patch(9, 4, 5);
  auto t = make(TransformKind::blur);
  t.sigma = 1e-4;
  CHECK(max_diff(apply_transform(t, p), p) < 1e-4);

  // A constant patch is a fixed point of blur for any sigma.
  Patch c(7, 2);
  std::fill(c.values.begin(), c.values.end(), 0.75);
  t.sigma = 0.9;
  CHECK(max_diff(apply_transform(t, c), c) < 1e-12);
}

TEST_CASE("pixel erasure leaves the expected positions untouched") {
  for (double f : {0.1, 0.25, 0.5}) {
    auto p = sample_patch(7, 5, 7);
    auto t = make(TransformKind::erase_pixel);
    t.fraction = f;
    t.seed = 99;
    auto out = apply_transform(t, p);
    int untouched = 0;
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x) {
        bool same = true;
        for (int c = 0; c < 5; ++c) same = same && out.at(y, x, c) == p.at(y, x, c);
        untouched += same;
      }
    CHECK(untouched == int(std::ceil((1.0 - f) * 49 - 1e-9)));
  }
}

TEST_CASE("band erasure sets bands to their patch mean") {
  auto p = sample_patch(5, 10, 8);
  auto t = make(TransformKind::erase_band);
  t.fraction = 0.2;
  t.seed = 4;
  auto out = apply_transform(t, p);
  int erased = 0;
  for (int c = 0; c < 10; ++c) {
    double mean = 0.0;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) mean += p.at(y, x, c);
    mean /= 25.0;
    bool changed = false;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) changed = changed || out.at(y, x, c) != p.at(y, x, c);
    if (changed) {
      ++erased;
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) CHECK(out.at(y, x, c) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
  CHECK(erased == 2);
}

TEST_CASE("crop and resize") {
  auto p = sample_patch(9, 3, 9);
  auto t = make(TransformKind::crop_resize);
  t.scale = 1.0;
  CHECK(max_diff(apply_transform(t, p), p) < 1e-12);

  // A linear ramp stays linear under crop and bilinear resize.
  Patch ramp(9, 1);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) ramp.at(y, x, 0) = 2.0 * x + y;
  t.scale = 0.6;
  t.seed = 3;
  auto out = apply_transform(t, ramp);
  const double dx = out.at(0, 1, 0) - out.at(0, 0, 0);
  const double dy = out.at(1, 0, 0) - out.at(0, 0, 0);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) CHECK(out.at(y, x, 0) == doctest::Approx(out.at(0, 0, 0) + dx * x + dy * y));

  t.scale = 0.1;
  CHECK_THROWS_AS(apply_transform(t, p), ConfigError);
}

TEST_CASE("transform frequencies match the configured probabilities") {
  AugmentationPool pool;
  const int n = 10000;
  std::vector<int> hits(kAllTransforms.size(), 0);
  int spectral = 0;
  for (int i = 0; i < n; ++i) {
    auto rng = make_rng(17, Stream::plan, {std::uint64_t(i)});
    auto plan = sample_plan(pool, rng);
    for (std::size_t k = 0; k < kAllTransforms.size(); ++k) hits[k] += plan.contains(kAllTransforms[k]);
    spectral += plan.contains(TransformKind::erase_band) || plan.contains(TransformKind::permute_band);
  }
  for (std::size_t k = 0; k < kAllTransforms.size(); ++k) {
    const auto& e = pool.entry(kAllTransforms[k]);
    const double expected = is_spectral(kAllTransforms[k]) ? pool.spectral_prob * e.probability : e.probability;
    INFO(transform_name(kAllTransforms[k]));
    CHECK(std::abs(double(hits[k]) / n - expected) <= 0.01);
  }
  CHECK(std::abs(double(spectral) / n - pool.spectral_prob) <= 0.01);
}

TEST_CASE("two views") {
  auto p = sample_patch(9, 4, 10);
  auto rng = make_rng(1, Stream::view);
  auto [a, b] = two_views(p, AugmentationPool::identity(), rng);
  CHECK(a == p);
  CHECK(b == p);

  auto r1 = make_rng(8, Stream::view, {1, 2, 3});
  auto r2 = make_rng(8, Stream::view, {1, 2, 3});
  AugmentationPool pool;
  CHECK(two_views(p, pool, r1) == two_views(p, pool, r2));

  int distinct = 0;
  for (int i = 0; i < 1000; ++i) {
    auto r = make_rng(3, Stream::view, {std::uint64_t(i)});
    auto v = two_views(p, pool, r);
    distinct += v.first != v.second;
  }
  CHECK(distinct > 990);

  auto r3 = make_rng(2, Stream::view);
  auto [fa, fb] = two_views(p, AugmentationPool::only(TransformKind::flip), AugmentationPool::identity(), r3);
  CHECK(fa != p);
  CHECK(fb == p);
}

TEST_CASE("pool validation") {
  AugmentationPool pool;
  CHECK_NOTHROW(pool.validate());
  pool.flip.probability = 1.5;
  CHECK_THROWS_AS(pool.validate(), ConfigError);
  pool = AugmentationPool{};
  pool.crop_scale_lo = 0.0;
  CHECK_THROWS_AS(pool.validate(), ConfigError);
  pool = AugmentationPool{};
  pool.rotation_quarters = {4};
  CHECK_THROWS_AS(pool.validate(), ConfigError);
}
