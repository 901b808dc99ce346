#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "irst/errors.hpp"
#include "irst/nd.hpp"

namespace irst {

// HWC image, unit-interval doubles internally; 8-bit at the I/O boundary.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;  // h*w*c, row-major HWC

  Image() = default;
  Image(int h_, int w_, int c_, double fill = 0.0)
      : h(h_), w(w_), c(c_), data(static_cast<size_t>(h_) * w_ * c_, fill) {}

  double& at(int i, int j, int k) { return data[(static_cast<size_t>(i) * w + j) * c + k]; }
  double at(int i, int j, int k) const { return data[(static_cast<size_t>(i) * w + j) * c + k]; }
  long numel() const { return static_cast<long>(data.size()); }
};

inline uint8_t to_u8(double v) {
  double q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<uint8_t>(q);
}

inline Image clamp01(Image img) {
  for (auto& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

inline cv::Mat to_mat_u8(const Image& img) {
  if (img.c != 3 && img.c != 1) throw ShapeError("to_mat_u8: 1 or 3 channels required");
  cv::Mat m(img.h, img.w, img.c == 3 ? CV_8UC3 : CV_8UC1);
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j) {
      if (img.c == 3) {
        // Image stores RGB; OpenCV expects BGR.
        auto& px = m.at<cv::Vec3b>(i, j);
        px[2] = to_u8(img.at(i, j, 0));
        px[1] = to_u8(img.at(i, j, 1));
        px[0] = to_u8(img.at(i, j, 2));
      } else {
        m.at<uint8_t>(i, j) = to_u8(img.at(i, j, 0));
      }
    }
  return m;
}

inline Image from_mat_u8(const cv::Mat& m) {
  if (m.type() != CV_8UC3 && m.type() != CV_8UC1)
    throw IngestError("from_mat_u8: unsupported pixel format");
  int c = m.type() == CV_8UC3 ? 3 : 1;
  Image img(m.rows, m.cols, c);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) {
      if (c == 3) {
        const auto& px = m.at<cv::Vec3b>(i, j);
        img.at(i, j, 0) = px[2] / 255.0;
        img.at(i, j, 1) = px[1] / 255.0;
        img.at(i, j, 2) = px[0] / 255.0;
      } else {
        img.at(i, j, 0) = m.at<uint8_t>(i, j) / 255.0;
      }
    }
  return img;
}

inline void save_png(const Image& img, const std::string& path) {
  if (!cv::imwrite(path, to_mat_u8(img)))
    throw IngestError("save_png: failed to write '" + path + "'");
}

inline Image load_image(const std::string& path) {
  cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
  if (m.empty()) throw IngestError("load_image: cannot read '" + path + "'");
  return from_mat_u8(m);
}

// Pinned lossless compressor used by payload_size: PNG at compression level 6.
inline constexpr int kPngCompressionLevel = 6;
inline constexpr const char* kCompressorId = "png:zlib-level-6";

inline std::vector<uint8_t> png_encode(const Image& img) {
  std::vector<uint8_t> buf;
  std::vector<int> opts = {cv::IMWRITE_PNG_COMPRESSION, kPngCompressionLevel};
  if (!cv::imencode(".png", to_mat_u8(img), buf, opts))
    throw NumericalError("png_encode: encoder failure");
  return buf;
}

// HWC image <-> CHW tensor used by the neural components.
inline NdArray image_to_chw(const Image& img) {
  NdArray t({img.c, img.h, img.w});
  for (int k = 0; k < img.c; ++k)
    for (int i = 0; i < img.h; ++i)
      for (int j = 0; j < img.w; ++j)
        t[(static_cast<long>(k) * img.h + i) * img.w + j] = img.at(i, j, k);
  return t;
}

inline Image chw_to_image(const NdArray& t) {
  if (t.shape.size() != 3) throw ShapeError("chw_to_image: rank-3 tensor required");
  Image img(t.shape[1], t.shape[2], t.shape[0]);
  for (int k = 0; k < img.c; ++k)
    for (int i = 0; i < img.h; ++i)
      for (int j = 0; j < img.w; ++j)
        img.at(i, j, k) = t[(static_cast<long>(k) * img.h + i) * img.w + j];
  return img;
}

}  // namespace irst
