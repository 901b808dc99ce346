#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "irst/effect_eval.hpp"
#include "irst/errors.hpp"
#include "irst/image.hpp"
#include "irst/segmentation.hpp"

namespace irst {

inline std::vector<uint8_t> build_task_mask(const SegmentationMap& map, const TaskSpec& task) {
  task.validate(map.num_classes);
  std::vector<uint8_t> mask(map.classes.size());
  for (size_t i = 0; i < map.classes.size(); ++i)
    mask[i] = task.task_classes.count(map.classes[i]) ? 1 : 0;
  return mask;
}

// Box blur with replicate edge padding; k = 1 is the identity.
inline Image mean_blur(const Image& img, int k) {
  if (k < 1 || k % 2 == 0) throw ConfigError("mean_blur: kernel size must be odd and >= 1");
  if (k > std::min(img.h, img.w)) throw ConfigError("mean_blur: kernel larger than image");
  if (k == 1) return img;
  Image out(img.h, img.w, img.c);
  int r = k / 2;
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j)
      for (int ch = 0; ch < img.c; ++ch) {
        double s = 0.0;
        for (int di = -r; di <= r; ++di)
          for (int dj = -r; dj <= r; ++dj) {
            int ii = std::clamp(i + di, 0, img.h - 1);
            int jj = std::clamp(j + dj, 0, img.w - 1);
            s += img.at(ii, jj, ch);
          }
        out.at(i, j, ch) = s / (static_cast<double>(k) * k);
      }
  return out;
}

// Kernel ladder keyed to predicted recovery quality. Tier i applies when
// yhat < threshold[i]; at or above the last threshold the top tier (k = 1,
// no blur) applies. kernel = 0 is the task-only sentinel: background pixels
// are replaced by the fill color and only the task region is transmitted.
struct BlurPolicy {
  static constexpr int kTaskOnly = 0;

  struct Tier {
    double upper_threshold;  // tier applies while yhat < upper_threshold
    int kernel;              // odd blur kernel, 1 = identity, 0 = task-only
  };
  std::vector<Tier> tiers;  // ascending thresholds, non-increasing kernels

  void validate() const {
    if (tiers.empty()) throw ConfigError("BlurPolicy: no tiers");
    for (size_t i = 0; i < tiers.size(); ++i) {
      if (i && tiers[i].upper_threshold <= tiers[i - 1].upper_threshold)
        throw ConfigError("BlurPolicy: thresholds must be strictly increasing");
      if (i && tiers[i].kernel > tiers[i - 1].kernel && tiers[i - 1].kernel != kTaskOnly)
        throw ConfigError("BlurPolicy: kernels must be non-increasing as yhat rises");
      if (tiers[i].kernel != kTaskOnly && tiers[i].kernel % 2 == 0)
        throw ConfigError("BlurPolicy: kernel sizes must be odd");
    }
  }

  // Index of the tier covering yhat; yhat at or above every threshold maps
  // to the implicit top tier (index == tiers.size(), kernel 1).
  int tier_for(double yhat) const {
    validate();
    for (size_t i = 0; i < tiers.size(); ++i)
      if (yhat < tiers[i].upper_threshold) return static_cast<int>(i);
    return static_cast<int>(tiers.size());
  }

  int kernel_for_tier(int tier) const {
    if (tier == static_cast<int>(tiers.size())) return 1;
    return tiers[tier].kernel;
  }

  // Quality quantized into 5 tiers: task-only, 15, 9, 5, then no blur.
  static BlurPolicy default_policy(double y_lo, double y_hi) {
    double step = (y_hi - y_lo) / 4.0;
    return {{{y_lo + 0 * step + step, kTaskOnly},
             {y_lo + 2 * step, 15},
             {y_lo + 3 * step, 9},
             {y_hi, 5}}};
  }
};

struct SelectedImage {
  Image pixels;
  std::vector<uint8_t> mask;  // task region
  int tier_used = 0;
  double predicted_quality = 0.0;
};

// Fuse step: blur (or fill) outside the task region, copy the task region
// verbatim. Task pixels are always bit-identical to the input.
inline SelectedImage select(const Image& image, const SegmentationMap& map,
                            const TaskSpec& task, double snr_db, const EvalModel& model,
                            const BlurPolicy& policy, double gamma_min, double gamma_max) {
  if (map.h != image.h || map.w != image.w)
    throw ShapeError("select: segmentation map does not match image size");
  EvalFeatures f = extract_features(map, task, snr_db, gamma_min, gamma_max);
  double yhat = predict(model, f);
  int tier = policy.tier_for(yhat);
  int k = policy.kernel_for_tier(tier);

  SelectedImage sel;
  sel.mask = build_task_mask(map, task);
  sel.tier_used = tier;
  sel.predicted_quality = yhat;
  if (k == 1) {
    sel.pixels = image;
    return sel;
  }
  Image background = k == BlurPolicy::kTaskOnly ? Image(image.h, image.w, image.c)
                                                : mean_blur(image, k);
  if (k == BlurPolicy::kTaskOnly) {
    for (int i = 0; i < image.h; ++i)
      for (int j = 0; j < image.w; ++j)
        for (int ch = 0; ch < image.c; ++ch)
          background.at(i, j, ch) = task.background_fill[ch] / 255.0;
  }
  sel.pixels = background;
  for (int i = 0; i < image.h; ++i)
    for (int j = 0; j < image.w; ++j)
      if (sel.mask[static_cast<size_t>(i) * image.w + j])
        for (int ch = 0; ch < image.c; ++ch) sel.pixels.at(i, j, ch) = image.at(i, j, ch);
  return sel;
}

// Bytes under the pinned lossless compressor (see image.hpp).
inline long payload_size(const Image& image) {
  return static_cast<long>(png_encode(image).size());
}

}  // namespace irst
