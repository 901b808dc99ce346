#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "irst/autograd.hpp"
#include "irst/errors.hpp"
#include "irst/image.hpp"
#include "irst/optim.hpp"
#include "irst/params.hpp"

namespace irst {

struct SegmentationMap {
  int h = 0, w = 0;
  int num_classes = 0;
  std::vector<int> classes;  // h*w, values in [0, num_classes)

  SegmentationMap() = default;
  SegmentationMap(int h_, int w_, int k)
      : h(h_), w(w_), num_classes(k), classes(static_cast<size_t>(h_) * w_, 0) {}

  int& at(int i, int j) { return classes[static_cast<size_t>(i) * w + j]; }
  int at(int i, int j) const { return classes[static_cast<size_t>(i) * w + j]; }
};

// Bijection class id <-> RGB triple.
class ColorMap {
 public:
  void add(int cls, uint8_t r, uint8_t g, uint8_t b) {
    uint32_t packed = pack(r, g, b);
    if (by_color_.count(packed))
      throw ConfigError("ColorMap: color already mapped (must be injective)");
    if (by_class_.count(cls)) throw ConfigError("ColorMap: duplicate class id");
    by_class_[cls] = packed;
    by_color_[packed] = cls;
  }

  size_t size() const { return by_class_.size(); }

  std::array<uint8_t, 3> color(int cls) const {
    auto it = by_class_.find(cls);
    if (it == by_class_.end())
      throw ConfigError("ColorMap: no color for class " + std::to_string(cls));
    return {static_cast<uint8_t>(it->second >> 16), static_cast<uint8_t>(it->second >> 8),
            static_cast<uint8_t>(it->second)};
  }

  int class_of(uint8_t r, uint8_t g, uint8_t b) const {
    auto it = by_color_.find(pack(r, g, b));
    if (it == by_color_.end()) {
      std::ostringstream os;
      os << "ColorMap: unmapped color (" << int(r) << "," << int(g) << "," << int(b) << ")";
      throw IngestError(os.str());
    }
    return it->second;
  }

  // One "class_id R G B" row per class.
  static ColorMap load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("ColorMap: cannot open '" + path + "'");
    ColorMap cm;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream is(line);
      int cls, r, g, b;
      if (!(is >> cls >> r >> g >> b))
        throw ConfigError("ColorMap: bad row '" + line + "' in " + path);
      cm.add(cls, static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b));
    }
    return cm;
  }

  void save(const std::string& path) const {
    std::ofstream f(path);
    for (const auto& [cls, packed] : by_class_)
      f << cls << " " << (packed >> 16) << " " << ((packed >> 8) & 0xff) << " "
        << (packed & 0xff) << "\n";
  }

  static ColorMap default_palette(int k) {
    static const std::array<std::array<uint8_t, 3>, 8> base = {{{0, 0, 0},
                                                                {230, 25, 75},
                                                                {60, 180, 75},
                                                                {0, 130, 200},
                                                                {255, 225, 25},
                                                                {145, 30, 180},
                                                                {70, 240, 240},
                                                                {240, 50, 230}}};
    ColorMap cm;
    for (int i = 0; i < k; ++i) {
      if (i < static_cast<int>(base.size())) {
        cm.add(i, base[i][0], base[i][1], base[i][2]);
      } else {
        cm.add(i, static_cast<uint8_t>(37 * i % 256), static_cast<uint8_t>(91 * i % 256),
               static_cast<uint8_t>(151 * i % 256));
      }
    }
    return cm;
  }

 private:
  static uint32_t pack(uint8_t r, uint8_t g, uint8_t b) {
    return (uint32_t(r) << 16) | (uint32_t(g) << 8) | uint32_t(b);
  }
  std::map<int, uint32_t> by_class_;
  std::map<uint32_t, int> by_color_;
};

inline Image colorize(const SegmentationMap& map, const ColorMap& colors) {
  Image img(map.h, map.w, 3);
  for (int i = 0; i < map.h; ++i)
    for (int j = 0; j < map.w; ++j) {
      auto c = colors.color(map.at(i, j));
      img.at(i, j, 0) = c[0] / 255.0;
      img.at(i, j, 1) = c[1] / 255.0;
      img.at(i, j, 2) = c[2] / 255.0;
    }
  return img;
}

inline SegmentationMap map_from_colors(const Image& img, const ColorMap& colors, int k) {
  SegmentationMap map(img.h, img.w, k);
  for (int i = 0; i < img.h; ++i)
    for (int j = 0; j < img.w; ++j)
      map.at(i, j) = colors.class_of(to_u8(img.at(i, j, 0)), to_u8(img.at(i, j, 1)),
                                     to_u8(img.at(i, j, 2)));
  return map;
}

// Neighborhood-majority refinement: pack R,G,B into one integer per pixel;
// for every interior pixel, count packed colors among its 8 neighbors (read
// from the ORIGINAL image); replace the center in the output copy when one
// color occurs at least 7 times. Borders stay unchanged.
inline Image sme_refine(const Image& rgb) {
  if (rgb.c < 3) throw ShapeError("sme_refine: 3-channel image required");
  if (rgb.h < 3 || rgb.w < 3) throw ShapeError("sme_refine: image must be at least 3x3");
  Image out = rgb;
  std::vector<uint32_t> packed(static_cast<size_t>(rgb.h) * rgb.w);
  for (int i = 0; i < rgb.h; ++i)
    for (int j = 0; j < rgb.w; ++j)
      packed[static_cast<size_t>(i) * rgb.w + j] =
          (uint32_t(to_u8(rgb.at(i, j, 0))) << 16) | (uint32_t(to_u8(rgb.at(i, j, 1))) << 8) |
          uint32_t(to_u8(rgb.at(i, j, 2)));
  for (int i = 1; i < rgb.h - 1; ++i)
    for (int j = 1; j < rgb.w - 1; ++j) {
      uint32_t colors[8];
      int n = 0;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) {
          if (di == 0 && dj == 0) continue;
          colors[n++] = packed[static_cast<size_t>(i + di) * rgb.w + (j + dj)];
        }
      for (int a = 0; a < 8; ++a) {
        int count = 0;
        for (int b = 0; b < 8; ++b)
          if (colors[b] == colors[a]) ++count;
        if (count >= 7) {
          out.at(i, j, 0) = ((colors[a] >> 16) & 0xff) / 255.0;
          out.at(i, j, 1) = ((colors[a] >> 8) & 0xff) / 255.0;
          out.at(i, j, 2) = (colors[a] & 0xff) / 255.0;
          break;
        }
      }
    }
  return out;
}

// Per-stage argmax positions recorded during 2x2 max pooling.
struct PooledIndices {
  std::vector<std::vector<long>> stages;
  std::vector<std::pair<int, int>> pre_pool_hw;
};

struct SegTrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 8;
  int epochs = 1;
  uint64_t seed = 0;
};

// Symmetric 3-stage encoder-decoder with index-tracked 2x2 pooling and a
// per-pixel softmax classifier.
class SegNet {
 public:
  SegNet(int num_classes, std::vector<int> channels = {64, 128, 256}, int in_channels = 3)
      : k_(num_classes), channels_(std::move(channels)), in_c_(in_channels) {}

  int num_classes() const { return k_; }
  int stages() const { return static_cast<int>(channels_.size()); }

  void init(uint64_t seed) {
    Rng rng(seed);
    enc_w_.clear(); enc_b_.clear(); dec_w_.clear(); dec_b_.clear();
    int prev = in_c_;
    for (int c : channels_) {
      enc_w_.push_back(ag::Var::param(ag::xavier_uniform({c, prev, 3, 3}, prev * 9, c * 9, rng)));
      enc_b_.push_back(ag::Var::param(NdArray({c})));
      prev = c;
    }
    for (int s = stages() - 1; s >= 0; --s) {
      int cin = channels_[s];
      int cout = s > 0 ? channels_[s - 1] : channels_[0];
      dec_w_.push_back(ag::Var::param(ag::xavier_uniform({cout, cin, 3, 3}, cin * 9, cout * 9, rng)));
      dec_b_.push_back(ag::Var::param(NdArray({cout})));
    }
    cls_w_ = ag::Var::param(ag::xavier_uniform({k_, channels_[0], 1, 1}, channels_[0], k_, rng));
    cls_b_ = ag::Var::param(NdArray({k_}));
  }

  std::vector<ag::Var> parameters() const {
    std::vector<ag::Var> ps;
    for (size_t i = 0; i < enc_w_.size(); ++i) { ps.push_back(enc_w_[i]); ps.push_back(enc_b_[i]); }
    for (size_t i = 0; i < dec_w_.size(); ++i) { ps.push_back(dec_w_[i]); ps.push_back(dec_b_[i]); }
    ps.push_back(cls_w_);
    ps.push_back(cls_b_);
    return ps;
  }

  std::pair<ag::Var, PooledIndices> encode(const ag::Var& x) const {
    const Shape& s = x.shape();
    int div = 1 << stages();
    if (s[1] % div || s[2] % div)
      throw ShapeError("SegNet::encode: H and W must be divisible by " + std::to_string(div));
    ag::Var h = x;
    PooledIndices pix;
    for (int i = 0; i < stages(); ++i) {
      h = ag::relu(ag::conv2d(h, enc_w_[i], enc_b_[i]));
      pix.pre_pool_hw.emplace_back(h.shape()[1], h.shape()[2]);
      auto pooled = ag::maxpool2x2(h);
      h = pooled.out;
      pix.stages.push_back(std::move(pooled.indices));
    }
    return {h, pix};
  }

  // Returns per-pixel class probabilities as [K, H, W].
  ag::Var decode_and_classify(const ag::Var& feats, const PooledIndices& pix) const {
    ag::Var logits = decode_logits(feats, pix);
    return probs_from_logits(logits);
  }

  ag::Var decode_logits(const ag::Var& feats, const PooledIndices& pix) const {
    if (pix.stages.size() != static_cast<size_t>(stages()))
      throw ShapeError("SegNet::decode: index stage count mismatch");
    ag::Var h = feats;
    for (int i = 0; i < stages(); ++i) {
      int src = stages() - 1 - i;
      auto [H, W] = pix.pre_pool_hw[src];
      h = ag::maxunpool2x2(h, pix.stages[src], H, W);
      h = ag::relu(ag::conv2d(h, dec_w_[i], dec_b_[i]));
    }
    return ag::conv2d(h, cls_w_, cls_b_);
  }

  static ag::Var probs_from_logits(const ag::Var& logits) {
    const Shape& s = logits.shape();
    int K = s[0], H = s[1], W = s[2];
    // [K,H,W] -> [H*W, K] rows, softmax per pixel, back to [K,H,W]
    std::vector<long> fwd(static_cast<size_t>(K) * H * W);
    for (long p = 0; p < static_cast<long>(H) * W; ++p)
      for (int k = 0; k < K; ++k) fwd[p * K + k] = static_cast<long>(k) * H * W + p;
    ag::Var rows = ag::gather(logits, fwd, {H * W, K});
    ag::Var sm = ag::softmax_lastdim(rows);
    std::vector<long> bwd(static_cast<size_t>(K) * H * W);
    for (int k = 0; k < K; ++k)
      for (long p = 0; p < static_cast<long>(H) * W; ++p)
        bwd[static_cast<long>(k) * H * W + p] = p * K + k;
    return ag::gather(sm, bwd, {K, H, W});
  }

  SegmentationMap segment(const Image& img) const {
    for (const auto& p : parameters())
      for (double v : p.val().data)
        if (!std::isfinite(v)) throw NumericalError("SegNet::segment: non-finite parameters");
    ag::Var x = ag::Var::constant(image_to_chw(img));
    auto [feats, pix] = encode(x);
    ag::Var logits = decode_logits(feats, pix);
    SegmentationMap map(img.h, img.w, k_);
    const auto& v = logits.val();
    long hw = static_cast<long>(img.h) * img.w;
    for (long p = 0; p < hw; ++p) {
      int best = 0;
      double bv = v[p];
      for (int k = 1; k < k_; ++k)
        if (v[static_cast<long>(k) * hw + p] > bv) { bv = v[static_cast<long>(k) * hw + p]; best = k; }
      map.classes[static_cast<size_t>(p)] = best;
    }
    return map;
  }

  struct TrainStats {
    std::vector<double> epoch_losses;
  };

  TrainStats train(const std::vector<std::pair<Image, SegmentationMap>>& dataset,
                   const SegTrainConfig& cfg) {
    if (dataset.empty()) throw ConfigError("SegNet::train: empty dataset");
    Adam opt(parameters(), cfg.learning_rate);
    TrainStats stats;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      double epoch_loss = 0.0;
      int nb = 0;
      for (size_t start = 0; start < dataset.size(); start += cfg.batch_size) {
        opt.zero_grad();
        size_t end = std::min(dataset.size(), start + cfg.batch_size);
        double batch_loss = 0.0;
        for (size_t i = start; i < end; ++i) {
          const auto& [img, gt] = dataset[i];
          ag::Var x = ag::Var::constant(image_to_chw(img));
          auto [feats, pix] = encode(x);
          ag::Var logits = decode_logits(feats, pix);
          int H = logits.shape()[1], W = logits.shape()[2];
          std::vector<long> fwd(static_cast<size_t>(k_) * H * W);
          for (long p = 0; p < static_cast<long>(H) * W; ++p)
            for (int k = 0; k < k_; ++k) fwd[p * k_ + k] = static_cast<long>(k) * H * W + p;
          ag::Var rows = ag::gather(logits, fwd, {H * W, k_});
          ag::Var loss = ag::scale(ag::softmax_xent(rows, gt.classes),
                                   1.0 / static_cast<double>(end - start));
          ag::backward(loss);
          batch_loss += loss.val()[0];
        }
        opt.step();
        epoch_loss += batch_loss;
        ++nb;
      }
      stats.epoch_losses.push_back(epoch_loss / nb);
    }
    return stats;
  }

  void save(ParamBundle& b, const std::string& prefix = "segnet") const {
    auto ps = parameters();
    for (size_t i = 0; i < ps.size(); ++i)
      b.put(prefix + "." + std::to_string(i), ps[i].val());
  }

  void load(const ParamBundle& b, const std::string& prefix = "segnet") {
    init(0);
    auto ps = parameters();
    for (size_t i = 0; i < ps.size(); ++i) {
      const NdArray& a = b.get(prefix + "." + std::to_string(i));
      if (a.shape != ps[i].shape())
        throw ConfigError("SegNet::load: shape mismatch at entry " + std::to_string(i));
      ps[i].val() = a;
    }
  }

 private:
  int k_;
  std::vector<int> channels_;
  int in_c_;
  std::vector<ag::Var> enc_w_, enc_b_, dec_w_, dec_b_;
  ag::Var cls_w_, cls_b_;
};

}  // namespace irst
