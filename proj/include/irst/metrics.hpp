#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "irst/errors.hpp"
#include "irst/image.hpp"

namespace irst {

// PSNR over 8-bit dynamic range: internal [0,1] values are scaled to
// [0,255] so the usual max = 255 convention holds. Returns +inf on zero MSE.
inline double psnr(const Image& a, const Image& b,
                   const std::vector<uint8_t>* region = nullptr) {
  if (a.h != b.h || a.w != b.w || a.c != b.c)
    throw ShapeError("psnr: image shapes differ");
  if (region && static_cast<long>(region->size()) != static_cast<long>(a.h) * a.w)
    throw ShapeError("psnr: region mask size must be H*W");
  double se = 0.0;
  long n = 0;
  for (int i = 0; i < a.h; ++i)
    for (int j = 0; j < a.w; ++j) {
      if (region && !(*region)[static_cast<size_t>(i) * a.w + j]) continue;
      for (int k = 0; k < a.c; ++k) {
        double d = (a.at(i, j, k) - b.at(i, j, k)) * 255.0;
        se += d * d;
        ++n;
      }
    }
  if (n == 0) throw ConfigError("psnr: empty region");
  double mse = se / static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

namespace detail {

inline double ssim_window(const Image& a, const Image& b, int i0, int j0, int win, int k) {
  constexpr double c1 = (0.01 * 255.0) * (0.01 * 255.0);
  constexpr double c2 = (0.03 * 255.0) * (0.03 * 255.0);
  double mx = 0.0, my = 0.0;
  int n = win * win;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      mx += a.at(i0 + i, j0 + j, k) * 255.0;
      my += b.at(i0 + i, j0 + j, k) * 255.0;
    }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (int i = 0; i < win; ++i)
    for (int j = 0; j < win; ++j) {
      double dx = a.at(i0 + i, j0 + j, k) * 255.0 - mx;
      double dy = b.at(i0 + i, j0 + j, k) * 255.0 - my;
      vx += dx * dx;
      vy += dy * dy;
      cov += dx * dy;
    }
  vx /= n;
  vy /= n;
  cov /= n;
  return (2.0 * mx * my + c1) * (2.0 * cov + c2) /
         ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace detail

// Mean of 8x8 sliding windows (stride 1) per channel. global_window = true
// evaluates the formula once over the whole image, for oracle comparisons.
inline double ssim(const Image& a, const Image& b, bool global_window = false) {
  if (a.h != b.h || a.w != b.w || a.c != b.c)
    throw ShapeError("ssim: image shapes differ");
  int win = global_window ? std::min(a.h, a.w) : 8;
  if (a.h < win || a.w < win) throw ShapeError("ssim: image smaller than window");
  double total = 0.0;
  long count = 0;
  if (global_window) {
    // single window covering the full image (clipped to square min(h,w))
    for (int k = 0; k < a.c; ++k) {
      total += detail::ssim_window(a, b, 0, 0, win, k);
      ++count;
    }
  } else {
    for (int k = 0; k < a.c; ++k)
      for (int i = 0; i + win <= a.h; ++i)
        for (int j = 0; j + win <= a.w; ++j) {
          total += detail::ssim_window(a, b, i, j, win, k);
          ++count;
        }
  }
  return total / static_cast<double>(count);
}

struct MetricsReport {
  double psnr_db = 0.0;       // vs. selected image (codec quality)
  double ssim_val = 0.0;      // vs. selected image
  double task_psnr_db = 0.0;  // vs. original image, task region only
  long payload_bytes = 0;
  double snr_db = 0.0;
  int depth = 0;
  int tier = 0;
};

// "inf" sentinel keeps CSV tables machine-readable.
inline std::string psnr_to_string(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace irst
