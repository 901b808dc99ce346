#pragma once

#include <cmath>
#include <vector>

#include "irst/errors.hpp"
#include "irst/image.hpp"
#include "irst/random.hpp"
#include "irst/segmentation.hpp"

namespace irst {

// Desk-scale stand-in for a labeled remote-sensing set: textured background
// plus geometric shapes, one class per shape, ground truth by construction.
struct SyntheticScene {
  Image image;
  SegmentationMap map;
};

inline std::vector<SyntheticScene> generate_synthetic(int n, int size, int k, uint64_t seed) {
  if (size < 8 || size % 8 != 0)
    throw ConfigError("generate_synthetic: size must be a positive multiple of 8");
  if (k < 2) throw ConfigError("generate_synthetic: need at least 2 classes");
  std::vector<SyntheticScene> scenes;
  scenes.reserve(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) {
    Rng rng(derive_seed(seed, 0x5CE4E, static_cast<uint64_t>(s)));
    SyntheticScene sc{Image(size, size, 3), SegmentationMap(size, size, k)};

    // class base colors, spread over RGB space
    std::vector<std::array<double, 3>> base(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c)
      base[static_cast<size_t>(c)] = {0.15 + 0.7 * ((c * 37) % 97) / 96.0,
                                      0.15 + 0.7 * ((c * 59 + 13) % 89) / 88.0,
                                      0.15 + 0.7 * ((c * 83 + 41) % 71) / 70.0};

    // textured background (class 0): low-frequency waves + per-pixel noise
    double fx = rng.uniform(0.05, 0.25), fy = rng.uniform(0.05, 0.25);
    double ph = rng.uniform(0.0, 6.28);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        double wave = 0.12 * std::sin(fx * i + fy * j + ph);
        for (int ch = 0; ch < 3; ++ch)
          sc.image.at(i, j, ch) =
              std::clamp(base[0][static_cast<size_t>(ch)] + wave + rng.uniform(-0.08, 0.08), 0.0, 1.0);
      }

    // one filled shape per non-background class, sized so that no class
    // exceeds ~95% and each scene keeps 5%..95% foreground
    for (int c = 1; c < k; ++c) {
      int side = rng.uniform_int(size / 4, size / 2);
      int ci = rng.uniform_int(side / 2, size - 1 - side / 2);
      int cj = rng.uniform_int(side / 2, size - 1 - side / 2);
      bool ellipse = rng.uniform() < 0.5;
      for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
          bool inside;
          if (ellipse) {
            double di = (i - ci) / (side / 2.0), dj = (j - cj) / (side / 2.0);
            inside = di * di + dj * dj <= 1.0;
          } else {
            inside = std::abs(i - ci) <= side / 2 && std::abs(j - cj) <= side / 2;
          }
          if (!inside) continue;
          sc.map.at(i, j) = c;
          double tex = 0.1 * std::sin(0.9 * i + 0.7 * j);
          for (int ch = 0; ch < 3; ++ch)
            sc.image.at(i, j, ch) = std::clamp(
                base[static_cast<size_t>(c)][static_cast<size_t>(ch)] + tex + rng.uniform(-0.05, 0.05),
                0.0, 1.0);
        }
    }
    scenes.push_back(std::move(sc));
  }
  return scenes;
}

}  // namespace irst
