#include "sscc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sscc/error.hpp"

namespace sscc {

std::string_view transform_name(TransformKind kind) {
  switch (kind) {
    case TransformKind::crop_resize: return "crop";
    case TransformKind::flip: return "flip";
    case TransformKind::rotate: return "rotate";
    case TransformKind::blur: return "blur";
    case TransformKind::erase_pixel: return "erase-pixel";
    case TransformKind::erase_band: return "erase-band";
    case TransformKind::permute_band: return "permute-band";
  }
  return "?";
}

std::optional<TransformKind> parse_transform(std::string_view name) {
  for (auto k : kAllTransforms)
    if (transform_name(k) == name) return k;
  return std::nullopt;
}

bool is_spectral(TransformKind kind) {
  return kind == TransformKind::erase_band || kind == TransformKind::permute_band;
}

AugmentationPool::Entry& AugmentationPool::entry(TransformKind kind) {
  return const_cast<Entry&>(std::as_const(*this).entry(kind));
}

const AugmentationPool::Entry& AugmentationPool::entry(TransformKind kind) const {
  switch (kind) {
    case TransformKind::crop_resize: return crop;
    case TransformKind::flip: return flip;
    case TransformKind::rotate: return rotate;
    case TransformKind::blur: return blur;
    case TransformKind::erase_pixel: return erase_pixel;
    case TransformKind::erase_band: return erase_band;
    case TransformKind::permute_band: return permute_band;
  }
  return crop;
}

void AugmentationPool::validate() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  for (auto k : kAllTransforms)
    if (!in_unit(entry(k).probability))
      throw ConfigError("probability of " + std::string(transform_name(k)) + " must lie in [0,1]");
  if (!in_unit(spectral_prob)) throw ConfigError("spectral_prob must lie in [0,1]");
  if (!(crop_scale_lo > 0.0 && crop_scale_lo <= crop_scale_hi && crop_scale_hi <= 1.0))
    throw ConfigError("crop scale range must satisfy 0 < lo <= hi <= 1");
  if (!(blur_sigma_lo > 0.0 && blur_sigma_lo <= blur_sigma_hi)) throw ConfigError("blur sigma range must satisfy 0 < lo <= hi");
  if (!(pixel_erase_fraction >= 0.0 && pixel_erase_fraction < 1.0))
    throw ConfigError("pixel erase fraction must lie in [0,1)");
  if (!(band_erase_fraction >= 0.0 && band_erase_fraction < 1.0))
    throw ConfigError("band erase fraction must lie in [0,1)");
  if (band_group_count < 1) throw ConfigError("band group count must be positive");
  if (rotate.enabled && rotate.probability > 0.0 && rotation_quarters.empty())
    throw ConfigError("rotation set is empty");
  for (int q : rotation_quarters)
    if (q < 1 || q > 3) throw ConfigError("rotations must be 90, 180 or 270 degrees");
}

AugmentationPool AugmentationPool::identity() {
  AugmentationPool pool;
  for (auto k : kAllTransforms) pool.entry(k).probability = 0.0;
  pool.spectral_prob = 0.0;
  return pool;
}

AugmentationPool AugmentationPool::only(TransformKind kind) {
  AugmentationPool pool = identity();
  pool.entry(kind).probability = 1.0;
  if (is_spectral(kind)) pool.spectral_prob = 1.0;
  return pool;
}

bool AugmentationPlan::contains(TransformKind kind) const {
  return std::any_of(steps.begin(), steps.end(), [kind](const Transform& t) { return t.kind == kind; });
}

AugmentationPlan sample_plan(const AugmentationPool& pool, Rng& rng) {
  AugmentationPlan plan;
  plan.seed = rng();
  Rng sub(plan.seed);

  auto draw = [&](TransformKind kind) {
    const auto& e = pool.entry(kind);
    return e.enabled && bernoulli(rng, e.probability);
  };
  auto make = [&](TransformKind kind) {
    Transform t;
    t.kind = kind;
    t.seed = sub();
    return t;
  };

  if (draw(TransformKind::crop_resize)) {
    auto t = make(TransformKind::crop_resize);
    t.scale = pool.crop_scale_lo == pool.crop_scale_hi ? pool.crop_scale_lo
                                                       : uniform(rng, pool.crop_scale_lo, pool.crop_scale_hi);
    plan.steps.push_back(t);
  }
  if (draw(TransformKind::flip)) {
    auto t = make(TransformKind::flip);
    switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
      case 0: t.flip_horizontal = true; break;
      case 1: t.flip_vertical = true; break;
      default: t.flip_horizontal = t.flip_vertical = true; break;
    }
    plan.steps.push_back(t);
  }
  if (draw(TransformKind::rotate)) {
    auto t = make(TransformKind::rotate);
    const auto& set = pool.rotation_quarters;
    t.quarter_turns = set[std::uniform_int_distribution<std::size_t>(0, set.size() - 1)(rng)];
    plan.steps.push_back(t);
  }
  if (draw(TransformKind::blur)) {
    auto t = make(TransformKind::blur);
    t.sigma = pool.blur_sigma_lo == pool.blur_sigma_hi ? pool.blur_sigma_lo
                                                       : uniform(rng, pool.blur_sigma_lo, pool.blur_sigma_hi);
    plan.steps.push_back(t);
  }
  if (draw(TransformKind::erase_pixel)) {
    auto t = make(TransformKind::erase_pixel);
    t.fraction = pool.pixel_erase_fraction;
    plan.steps.push_back(t);
  }
  if (bernoulli(rng, pool.spectral_prob)) {
    if (draw(TransformKind::erase_band)) {
      auto t = make(TransformKind::erase_band);
      t.fraction = pool.band_erase_fraction;
      plan.steps.push_back(t);
    }
    if (draw(TransformKind::permute_band)) {
      auto t = make(TransformKind::permute_band);
      t.groups = pool.band_group_count;
      plan.steps.push_back(t);
    }
  }
  return plan;
}

namespace {

Patch crop_resize(const Patch& in, double scale, std::uint64_t seed) {
  const int side = in.side;
  const int crop = static_cast<int>(std::floor(scale * side + 1e-9));
  if (crop < 2)
    throw ConfigError("crop of scale " + std::to_string(scale) + " on a " + std::to_string(side) +
                      "-pixel patch is narrower than 2 pixels");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, side - crop);
  const int r0 = pick(rng);
  const int c0 = pick(rng);

  Patch out(side, in.channels);
  out.center_row = in.center_row;
  out.center_col = in.center_col;
  const double step = double(crop - 1) / double(side - 1);
  for (int r = 0; r < side; ++r) {
    const double sr = r0 + r * step;
    const int ra = std::min(static_cast<int>(std::floor(sr)), r0 + crop - 1);
    const int rb = std::min(ra + 1, r0 + crop - 1);
    const double fr = sr - ra;
    for (int c = 0; c < side; ++c) {
      const double sc = c0 + c * step;
      const int ca = std::min(static_cast<int>(std::floor(sc)), c0 + crop - 1);
      const int cb = std::min(ca + 1, c0 + crop - 1);
      const double fc = sc - ca;
      for (int b = 0; b < in.channels; ++b) {
        const double top = (1 - fc) * in.at(ra, ca, b) + fc * in.at(ra, cb, b);
        const double bottom = (1 - fc) * in.at(rb, ca, b) + fc * in.at(rb, cb, b);
        out.at(r, c, b) = (1 - fr) * top + fr * bottom;
      }
    }
  }
  return out;
}

Patch flip(const Patch& in, bool horizontal, bool vertical) {
  Patch out = in;
  const int s = in.side;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      const int sr = vertical ? s - 1 - r : r;
      const int sc = horizontal ? s - 1 - c : c;
      for (int b = 0; b < in.channels; ++b) out.at(r, c, b) = in.at(sr, sc, b);
    }
  return out;
}

Patch rotate(const Patch& in, int quarter_turns) {
  Patch out = in;
  const int s = in.side;
  const int q = ((quarter_turns % 4) + 4) % 4;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      int sr = r, sc = c;
      switch (q) {
        case 1: sr = c; sc = s - 1 - r; break;
        case 2: sr = s - 1 - r; sc = s - 1 - c; break;
        case 3: sr = s - 1 - c; sc = r; break;
        default: break;
      }
      for (int b = 0; b < in.channels; ++b) out.at(r, c, b) = in.at(sr, sc, b);
    }
  return out;
}

Patch gaussian_blur(const Patch& in, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int s = in.side;
  Patch tmp = in;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int b = 0; b < in.channels; ++b) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * in.at(r, reflect_index(c + i, s), b);
        tmp.at(r, c, b) = acc;
      }
  Patch out = in;
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int b = 0; b < in.channels; ++b) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp.at(reflect_index(r + i, s), c, b);
        out.at(r, c, b) = acc;
      }
  return out;
}

/// First `count` entries of a seeded Fisher-Yates shuffle of 0..n-1.
std::vector<int> choose(int n, int count, std::uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const int j = std::uniform_int_distribution<int>(i, n - 1)(rng);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

Patch erase_pixels(const Patch& in, double fraction, std::uint64_t seed) {
  const int s = in.side;
  const int positions = s * s;
  const int count = static_cast<int>(std::floor(fraction * positions));
  std::vector<double> mean(in.channels, 0.0);
  for (int p = 0; p < positions; ++p)
    for (int b = 0; b < in.channels; ++b) mean[b] += in.values[std::size_t(p) * in.channels + b];
  for (double& m : mean) m /= positions;

  Patch out = in;
  for (int p : choose(positions, count, seed))
    for (int b = 0; b < in.channels; ++b) out.values[std::size_t(p) * in.channels + b] = mean[b];
  return out;
}

Patch erase_bands(const Patch& in, double fraction, std::uint64_t seed) {
  const int n = in.channels;
  const int count = fraction > 0.0 ? std::clamp(static_cast<int>(std::lround(fraction * n)), 1, n) : 0;
  const int positions = in.side * in.side;
  Patch out = in;
  for (int b : choose(n, count, seed)) {
    double mean = 0.0;
    for (int p = 0; p < positions; ++p) mean += in.values[std::size_t(p) * n + b];
    mean /= positions;
    for (int p = 0; p < positions; ++p) out.values[std::size_t(p) * n + b] = mean;
  }
  return out;
}

Patch permute_bands(const Patch& in, int groups, std::uint64_t seed) {
  const int n = in.channels;
  const int g = std::clamp(groups, 1, n);
  std::vector<int> order = choose(g, g, seed);
  // Output band list: groups concatenated in permuted order, each group keeping
  // its internal band order.
  std::vector<int> source;
  source.reserve(n);
  for (int grp : order) {
    const int lo = grp * n / g;
    const int hi = (grp + 1) * n / g;
    for (int b = lo; b < hi; ++b) source.push_back(b);
  }
  Patch out = in;
  const int positions = in.side * in.side;
  for (int p = 0; p < positions; ++p)
    for (int b = 0; b < n; ++b)
      out.values[std::size_t(p) * n + b] = in.values[std::size_t(p) * n + source[b]];
  return out;
}

}  // namespace

Patch apply_transform(const Transform& t, const Patch& patch) {
  switch (t.kind) {
    case TransformKind::crop_resize: return crop_resize(patch, t.scale, t.seed);
    case TransformKind::flip: return flip(patch, t.flip_horizontal, t.flip_vertical);
    case TransformKind::rotate: return rotate(patch, t.quarter_turns);
    case TransformKind::blur: return gaussian_blur(patch, t.sigma);
    case TransformKind::erase_pixel: return erase_pixels(patch, t.fraction, t.seed);
    case TransformKind::erase_band: return erase_bands(patch, t.fraction, t.seed);
    case TransformKind::permute_band: return permute_bands(patch, t.groups, t.seed);
  }
  return patch;
}

Patch apply_plan(const AugmentationPlan& plan, const Patch& patch) {
  Patch out = patch;
  for (const auto& t : plan.steps) out = apply_transform(t, out);
  return out;
}

std::pair<Patch, Patch> two_views(const Patch& patch, const AugmentationPool& pool, Rng& rng) {
  return two_views(patch, pool, pool, rng);
}

std::pair<Patch, Patch> two_views(const Patch& patch, const AugmentationPool& pool_a,
                                  const AugmentationPool& pool_b, Rng& rng) {
  auto plan_a = sample_plan(pool_a, rng);
  auto plan_b = sample_plan(pool_b, rng);
  return {apply_plan(plan_a, patch), apply_plan(plan_b, patch)};
}

}  // namespace sscc
