#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "sscc/hsi.hpp"
#include "sscc/random.hpp"

namespace sscc {

enum class TransformKind {
  crop_resize,
  flip,
  rotate,
  blur,
  erase_pixel,
  erase_band,
  permute_band,
};

inline constexpr std::array<TransformKind, 7> kAllTransforms{
    TransformKind::crop_resize, TransformKind::flip,       TransformKind::rotate,      TransformKind::blur,
    TransformKind::erase_pixel, TransformKind::erase_band, TransformKind::permute_band,
};

std::string_view transform_name(TransformKind kind);
std::optional<TransformKind> parse_transform(std::string_view name);
bool is_spectral(TransformKind kind);

/// The pool every view's transform composition is drawn from.
///
/// Spatial transforms are included independently with their own probability.
/// Spectral transforms are first gated by `spectral_prob` and then included
/// with their own probability, so the effective rate of e.g. band erasure is
/// spectral_prob * erase_band.probability.
struct AugmentationPool {
  struct Entry {
    bool enabled = true;
    double probability = 0.0;
  };

  Entry crop{true, 0.8};
  Entry flip{true, 0.5};
  Entry rotate{true, 0.5};
  Entry blur{true, 0.3};
  Entry erase_pixel{true, 0.2};
  Entry erase_band{true, 1.0};
  Entry permute_band{true, 1.0};

  double crop_scale_lo = 0.6;
  double crop_scale_hi = 1.0;
  std::vector<int> rotation_quarters{1, 2, 3};
  double blur_sigma_lo = 0.1;
  double blur_sigma_hi = 1.0;
  double pixel_erase_fraction = 0.1;
  double band_erase_fraction = 0.1;
  int band_group_count = 4;
  double spectral_prob = 0.1;

  Entry& entry(TransformKind kind);
  const Entry& entry(TransformKind kind) const;

  void validate() const;

  /// Every probability zero: plans are always empty.
  static AugmentationPool identity();
  /// Exactly one transform, always applied.
  static AugmentationPool only(TransformKind kind);
};

struct Transform {
  TransformKind kind = TransformKind::flip;
  double scale = 1.0;        // crop_resize
  bool flip_horizontal = false;
  bool flip_vertical = false;
  int quarter_turns = 0;     // rotate, counter-clockwise
  double sigma = 0.0;        // blur
  double fraction = 0.0;     // erase_pixel, erase_band
  int groups = 1;            // permute_band
  std::uint64_t seed = 0;    // placement of crops, erased positions, group order
};

struct AugmentationPlan {
  std::vector<Transform> steps;
  std::uint64_t seed = 0;

  bool contains(TransformKind kind) const;
  bool empty() const { return steps.empty(); }
};

AugmentationPlan sample_plan(const AugmentationPool& pool, Rng& rng);

/// Applies the plan's transforms in order. Output has the input's shape.
/// Throws ConfigError when a crop would be narrower than 2 pixels.
Patch apply_plan(const AugmentationPlan& plan, const Patch& patch);

/// Single transform, exposed for tests and previews.
Patch apply_transform(const Transform& t, const Patch& patch);

std::pair<Patch, Patch> two_views(const Patch& patch, const AugmentationPool& pool, Rng& rng);

/// Views drawn from different pools, used by the augmentation-pair sweep.
std::pair<Patch, Patch> two_views(const Patch& patch, const AugmentationPool& pool_a,
                                  const AugmentationPool& pool_b, Rng& rng);

}  // namespace sscc
