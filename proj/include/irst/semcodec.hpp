#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "irst/autograd.hpp"
#include "irst/errors.hpp"
#include "irst/image.hpp"
#include "irst/optim.hpp"
#include "irst/params.hpp"

namespace irst {

struct WindowConfig {
  int window = 4;
  int shift = 2;  // window / 2 for alternating blocks
};

struct SemCodecConfig {
  int patch = 4;
  int window = 4;
  std::vector<int> widths = {128, 256};  // stage token widths
  std::vector<int> blocks = {2, 4};      // attention blocks per stage
  std::vector<int> heads = {4, 8};
  int latent_channels = 96;
  int in_channels = 3;
};

namespace semdetail {

// Cyclic roll of an [Ht, Wt, C] token grid by (di, dj).
inline std::vector<long> roll_index(int Ht, int Wt, int C, int di, int dj) {
  std::vector<long> idx(static_cast<size_t>(Ht) * Wt * C);
  long p = 0;
  for (int i = 0; i < Ht; ++i)
    for (int j = 0; j < Wt; ++j) {
      int si = ((i + di) % Ht + Ht) % Ht;
      int sj = ((j + dj) % Wt + Wt) % Wt;
      long base = (static_cast<long>(si) * Wt + sj) * C;
      for (int c = 0; c < C; ++c) idx[p++] = base + c;
    }
  return idx;
}

// Group tokens into window x window tiles, tile-major.
inline std::vector<long> window_partition_index(int Ht, int Wt, int C, int win) {
  std::vector<long> idx(static_cast<size_t>(Ht) * Wt * C);
  long p = 0;
  for (int wi = 0; wi < Ht / win; ++wi)
    for (int wj = 0; wj < Wt / win; ++wj)
      for (int ti = 0; ti < win; ++ti)
        for (int tj = 0; tj < win; ++tj) {
          long base = (static_cast<long>(wi * win + ti) * Wt + (wj * win + tj)) * C;
          for (int c = 0; c < C; ++c) idx[p++] = base + c;
        }
  return idx;
}

inline std::vector<long> invert_permutation(const std::vector<long>& idx) {
  std::vector<long> inv(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) inv[static_cast<size_t>(idx[i])] = static_cast<long>(i);
  return inv;
}

// [nW*T, C] -> [nW*h, T, d] head split (and its inverse).
inline std::vector<long> head_split_index(int nW, int T, int h, int d) {
  std::vector<long> idx(static_cast<size_t>(nW) * T * h * d);
  long p = 0;
  for (int w = 0; w < nW; ++w)
    for (int hh = 0; hh < h; ++hh)
      for (int t = 0; t < T; ++t)
        for (int k = 0; k < d; ++k)
          idx[p++] = (static_cast<long>(w) * T + t) * (h * d) + hh * d + k;
  return idx;
}

}  // namespace semdetail

// One pre-norm windowed-attention block: LN -> (S)W-MSA -> residual,
// LN -> FFN -> residual. Relative position information enters as a learned
// per-head [T, T] bias shared across windows.
struct SwinBlockParams {
  ag::Var ln1_g, ln1_b;
  ag::Var wq, bq, wk, bk, wv, bv;
  ag::Var attn_bias;  // [heads, T, T]
  ag::Var wo, bo;
  ag::Var ln2_g, ln2_b;
  ag::Var w1, b1, w2, b2;  // FFN C -> 2C -> C
  int heads = 1;
  bool shifted = false;

  void init(int C, int T, uint64_t seed, int heads_, bool shifted_, Rng& rng) {
    heads = heads_;
    shifted = shifted_;
    (void)seed;
    ln1_g = ag::Var::param(NdArray({C}, std::vector<double>(C, 1.0)));
    ln1_b = ag::Var::param(NdArray({C}));
    wq = ag::Var::param(ag::xavier_uniform({C, C}, C, C, rng));
    bq = ag::Var::param(NdArray({C}));
    wk = ag::Var::param(ag::xavier_uniform({C, C}, C, C, rng));
    bk = ag::Var::param(NdArray({C}));
    wv = ag::Var::param(ag::xavier_uniform({C, C}, C, C, rng));
    bv = ag::Var::param(NdArray({C}));
    attn_bias = ag::Var::param(NdArray({heads, T, T}));
    wo = ag::Var::param(ag::xavier_uniform({C, C}, C, C, rng));
    bo = ag::Var::param(NdArray({C}));
    ln2_g = ag::Var::param(NdArray({C}, std::vector<double>(C, 1.0)));
    ln2_b = ag::Var::param(NdArray({C}));
    w1 = ag::Var::param(ag::xavier_uniform({C, 2 * C}, C, 2 * C, rng));
    b1 = ag::Var::param(NdArray({2 * C}));
    w2 = ag::Var::param(ag::xavier_uniform({2 * C, C}, 2 * C, C, rng));
    b2 = ag::Var::param(NdArray({C}));
  }

  std::vector<ag::Var> parameters() const {
    return {ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, attn_bias, wo, bo,
            ln2_g, ln2_b, w1, b1, w2, b2};
  }
};

// Applies one block to tokens of an Ht x Wt grid. attn_capture, when given,
// receives the post-softmax attention probabilities [nW*heads, T, T].
inline ag::Var window_attention(const ag::Var& tokens, int Ht, int Wt,
                                const WindowConfig& cfg, const SwinBlockParams& p,
                                NdArray* attn_capture = nullptr) {
  const Shape& s = tokens.shape();
  if (s.size() != 2 || s[0] != Ht * Wt)
    throw ShapeError("window_attention: tokens must be [Ht*Wt, C]");
  if (Ht % cfg.window || Wt % cfg.window)
    throw ShapeError("window_attention: window must divide grid sides");
  int C = s[1];
  int win = cfg.window, T = win * win;
  int nW = (Ht / win) * (Wt / win);
  int h = p.heads, d = C / h;
  if (h * d != C) throw ShapeError("window_attention: heads must divide channel width");

  using namespace semdetail;
  ag::Var x = tokens;
  if (p.shifted && cfg.shift > 0)
    x = ag::gather(x, roll_index(Ht, Wt, C, cfg.shift, cfg.shift), {Ht * Wt, C});

  auto part_idx = window_partition_index(Ht, Wt, C, win);
  ag::Var xp = ag::gather(x, part_idx, {nW * T, C});

  ag::Var xn = ag::layernorm_lastdim(xp, p.ln1_g, p.ln1_b);
  ag::Var q = ag::linear(xn, p.wq, p.bq);
  ag::Var k = ag::linear(xn, p.wk, p.bk);
  ag::Var v = ag::linear(xn, p.wv, p.bv);
  auto hs = head_split_index(nW, T, h, d);
  q = ag::gather(q, hs, {nW * h, T, d});
  k = ag::gather(k, hs, {nW * h, T, d});
  v = ag::gather(v, hs, {nW * h, T, d});

  ag::Var scores = ag::scale(ag::matmul(q, ag::transpose_last2(k)), 1.0 / std::sqrt(double(d)));
  // broadcast learned bias over windows
  std::vector<long> bidx(static_cast<size_t>(nW) * h * T * T);
  long bp = 0;
  for (int w = 0; w < nW; ++w)
    for (int hh = 0; hh < h; ++hh)
      for (long t = 0; t < static_cast<long>(T) * T; ++t)
        bidx[static_cast<size_t>(bp++)] = static_cast<long>(hh) * T * T + t;
  scores = ag::add(scores, ag::gather(p.attn_bias, std::move(bidx), {nW * h, T, T}));
  ag::Var probs = ag::softmax_lastdim(scores);
  if (attn_capture) *attn_capture = probs.val();

  ag::Var attn = ag::matmul(probs, v);  // [nW*h, T, d]
  attn = ag::gather(attn, invert_permutation(hs), {nW * T, C});
  attn = ag::linear(attn, p.wo, p.bo);

  ag::Var y = ag::add(xp, attn);
  ag::Var yn = ag::layernorm_lastdim(y, p.ln2_g, p.ln2_b);
  ag::Var ff = ag::linear(ag::relu(ag::linear(yn, p.w1, p.b1)), p.w2, p.b2);
  y = ag::add(y, ff);

  y = ag::gather(y, invert_permutation(part_idx), {Ht * Wt, C});
  if (p.shifted && cfg.shift > 0)
    y = ag::gather(y, roll_index(Ht, Wt, C, -cfg.shift, -cfg.shift), {Ht * Wt, C});
  return y;
}

struct SemTrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 8;
  int epochs = 1;
  uint64_t seed = 0;
};

// Hierarchical windowed-attention autoencoder: patch embedding, two stages
// of attention blocks separated by one patch merge, a 96-channel latent
// projection, and the mirrored decoder.
class SemCodec {
 public:
  explicit SemCodec(SemCodecConfig cfg = {}) : cfg_(std::move(cfg)) {
    if (cfg_.widths.size() != 2 || cfg_.blocks.size() != 2 || cfg_.heads.size() != 2)
      throw ConfigError("SemCodec: exactly two stages expected");
  }

  const SemCodecConfig& config() const { return cfg_; }

  void init(uint64_t seed) {
    Rng rng(seed);
    int pd = cfg_.patch * cfg_.patch * cfg_.in_channels;
    int c0 = cfg_.widths[0], c1 = cfg_.widths[1];
    int T = cfg_.window * cfg_.window;
    embed_w_ = ag::Var::param(ag::xavier_uniform({pd, c0}, pd, c0, rng));
    embed_b_ = ag::Var::param(NdArray({c0}));
    auto make_blocks = [&](std::vector<SwinBlockParams>& dst, int n, int C, int heads) {
      dst.assign(static_cast<size_t>(n), SwinBlockParams{});
      for (int i = 0; i < n; ++i) dst[i].init(C, T, seed, heads, i % 2 == 1, rng);
    };
    make_blocks(enc_s0_, cfg_.blocks[0], c0, cfg_.heads[0]);
    merge_w_ = ag::Var::param(ag::xavier_uniform({4 * c0, c1}, 4 * c0, c1, rng));
    merge_b_ = ag::Var::param(NdArray({c1}));
    make_blocks(enc_s1_, cfg_.blocks[1], c1, cfg_.heads[1]);
    enc_ln_g_ = ag::Var::param(NdArray({c1}, std::vector<double>(c1, 1.0)));
    enc_ln_b_ = ag::Var::param(NdArray({c1}));
    proj_w_ = ag::Var::param(ag::xavier_uniform({c1, cfg_.latent_channels}, c1, cfg_.latent_channels, rng));
    proj_b_ = ag::Var::param(NdArray({cfg_.latent_channels}));

    unproj_w_ = ag::Var::param(ag::xavier_uniform({cfg_.latent_channels, c1}, cfg_.latent_channels, c1, rng));
    unproj_b_ = ag::Var::param(NdArray({c1}));
    make_blocks(dec_s1_, cfg_.blocks[1], c1, cfg_.heads[1]);
    unmerge_w_ = ag::Var::param(ag::xavier_uniform({c1, 4 * c0}, c1, 4 * c0, rng));
    unmerge_b_ = ag::Var::param(NdArray({4 * c0}));
    make_blocks(dec_s0_, cfg_.blocks[0], c0, cfg_.heads[0]);
    unembed_w_ = ag::Var::param(ag::xavier_uniform({c0, pd}, c0, pd, rng));
    unembed_b_ = ag::Var::param(NdArray({pd}));
  }

  std::vector<ag::Var> parameters() const {
    std::vector<ag::Var> ps = {embed_w_, embed_b_, merge_w_, merge_b_, enc_ln_g_, enc_ln_b_,
                               proj_w_, proj_b_, unproj_w_, unproj_b_, unmerge_w_, unmerge_b_,
                               unembed_w_, unembed_b_};
    for (const auto* blocks : {&enc_s0_, &enc_s1_, &dec_s1_, &dec_s0_})
      for (const auto& b : *blocks)
        for (auto& v : b.parameters()) ps.push_back(v);
    return ps;
  }

  // Non-overlapping patch flattening + linear projection to the stage-1 width.
  ag::Var patch_embed(const ag::Var& image_chw) const {
    const Shape& s = image_chw.shape();
    if (s.size() != 3 || s[0] != cfg_.in_channels)
      throw ShapeError("patch_embed: expected [" + std::to_string(cfg_.in_channels) + ",H,W]");
    int H = s[1], W = s[2], p = cfg_.patch;
    if (H % p || W % p) throw ShapeError("patch_embed: H, W must be divisible by patch size");
    int Hp = H / p, Wp = W / p, pd = p * p * cfg_.in_channels;
    std::vector<long> idx(static_cast<size_t>(Hp) * Wp * pd);
    long q = 0;
    for (int pi = 0; pi < Hp; ++pi)
      for (int pj = 0; pj < Wp; ++pj)
        for (int di = 0; di < p; ++di)
          for (int dj = 0; dj < p; ++dj)
            for (int c = 0; c < cfg_.in_channels; ++c)
              idx[q++] = (static_cast<long>(c) * H + pi * p + di) * W + pj * p + dj;
    ag::Var patches = ag::gather(image_chw, std::move(idx), {Hp * Wp, pd});
    return ag::linear(patches, embed_w_, embed_b_);
  }

  // 2x2 token concatenation (4C channels) + projection to 2C; halves sides.
  ag::Var patch_merge(const ag::Var& tokens, int Ht, int Wt) const {
    if (Ht % 2 || Wt % 2) throw ShapeError("patch_merge: grid sides must be even");
    int C = tokens.shape()[1];
    int H2 = Ht / 2, W2 = Wt / 2;
    std::vector<long> idx(static_cast<size_t>(H2) * W2 * 4 * C);
    long q = 0;
    for (int mi = 0; mi < H2; ++mi)
      for (int mj = 0; mj < W2; ++mj)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b)
            for (int c = 0; c < C; ++c)
              idx[q++] = (static_cast<long>(2 * mi + a) * Wt + 2 * mj + b) * C + c;
    ag::Var merged = ag::gather(tokens, std::move(idx), {H2 * W2, 4 * C});
    return ag::linear(merged, merge_w_, merge_b_);
  }

  // Projection 2C -> 4C redistributed to the 2x2 neighborhoods; doubles sides.
  ag::Var reverse_patch_merge(const ag::Var& tokens, int H2, int W2) const {
    ag::Var wide = ag::linear(tokens, unmerge_w_, unmerge_b_);
    int C4 = wide.shape()[1], C = C4 / 4;
    int Ht = H2 * 2, Wt = W2 * 2;
    std::vector<long> idx(static_cast<size_t>(Ht) * Wt * C);
    long q = 0;
    for (int i = 0; i < Ht; ++i)
      for (int j = 0; j < Wt; ++j) {
        int mi = i / 2, mj = j / 2, a = i % 2, b = j % 2;
        for (int c = 0; c < C; ++c)
          idx[q++] = (static_cast<long>(mi) * W2 + mj) * C4 + (a * 2 + b) * C + c;
      }
    return ag::gather(wide, std::move(idx), {Ht * Wt, C});
  }

  struct LatentDims { int Hg = 0, Wg = 0; };

  LatentDims latent_dims(int H, int W) const {
    return {H / cfg_.patch / 2, W / cfg_.patch / 2};
  }

  ag::Var encode_var(const ag::Var& image_chw) const {
    int H = image_chw.shape()[1], W = image_chw.shape()[2];
    int Hp = H / cfg_.patch, Wp = W / cfg_.patch;
    WindowConfig wc{cfg_.window, cfg_.window / 2};
    ag::Var x = patch_embed(image_chw);
    for (const auto& b : enc_s0_) x = window_attention(x, Hp, Wp, wc, b);
    x = patch_merge(x, Hp, Wp);
    int Hg = Hp / 2, Wg = Wp / 2;
    for (const auto& b : enc_s1_) x = window_attention(x, Hg, Wg, wc, b);
    x = ag::layernorm_lastdim(x, enc_ln_g_, enc_ln_b_);
    return ag::linear(x, proj_w_, proj_b_);  // [Hg*Wg, latent]
  }

  ag::Var decode_var(const ag::Var& latent_tokens, int Hg, int Wg) const {
    WindowConfig wc{cfg_.window, cfg_.window / 2};
    ag::Var x = ag::linear(latent_tokens, unproj_w_, unproj_b_);
    for (const auto& b : dec_s1_) x = window_attention(x, Hg, Wg, wc, b);
    x = reverse_patch_merge(x, Hg, Wg);
    int Hp = Hg * 2, Wp = Wg * 2;
    for (const auto& b : dec_s0_) x = window_attention(x, Hp, Wp, wc, b);
    ag::Var patches = ag::linear(x, unembed_w_, unembed_b_);  // [Hp*Wp, p*p*c]
    // redistribute patches back to CHW
    int p = cfg_.patch, cch = cfg_.in_channels;
    int H = Hp * p, W = Wp * p;
    std::vector<long> idx(static_cast<size_t>(cch) * H * W);
    long q = 0;
    for (int c = 0; c < cch; ++c)
      for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
          int pi = i / p, pj = j / p, di = i % p, dj = j % p;
          idx[q++] = (static_cast<long>(pi) * Wp + pj) * (p * p * cch) +
                     (static_cast<long>(di) * p + dj) * cch + c;
        }
    return ag::gather(patches, std::move(idx), {cch, H, W});
  }

  // Tokens [Hg*Wg, C] <-> spatial latent [C, Hg, Wg] handed to the channel codec.
  static NdArray tokens_to_spatial(const NdArray& tokens, int Hg, int Wg) {
    int C = tokens.shape[1];
    NdArray out({C, Hg, Wg});
    for (int c = 0; c < C; ++c)
      for (long t = 0; t < static_cast<long>(Hg) * Wg; ++t)
        out[static_cast<long>(c) * Hg * Wg + t] = tokens[t * C + c];
    return out;
  }
  static NdArray spatial_to_tokens(const NdArray& spatial) {
    int C = spatial.shape[0];
    long hw = static_cast<long>(spatial.shape[1]) * spatial.shape[2];
    NdArray out({static_cast<int>(hw), C});
    for (int c = 0; c < C; ++c)
      for (long t = 0; t < hw; ++t) out[t * C + c] = spatial[static_cast<long>(c) * hw + t];
    return out;
  }

  NdArray sem_encode(const Image& img) const {
    check_finite();
    ag::Var x = ag::Var::constant(image_to_chw(img));
    ag::Var lat = encode_var(x);
    auto [Hg, Wg] = latent_dims(img.h, img.w);
    return tokens_to_spatial(lat.val(), Hg, Wg);
  }

  Image sem_decode(const NdArray& latent_spatial) const {
    check_finite();
    int Hg = latent_spatial.shape[1], Wg = latent_spatial.shape[2];
    ag::Var toks = ag::Var::constant(spatial_to_tokens(latent_spatial));
    ag::Var out = decode_var(toks, Hg, Wg);
    return clamp01(chw_to_image(out.val()));
  }

  struct TrainStats {
    std::vector<double> epoch_losses;
  };

  // Autoencoder pre-training, MSE loss, no channel in the loop.
  TrainStats train(const std::vector<Image>& dataset, const SemTrainConfig& cfg) {
    if (dataset.empty()) throw ConfigError("SemCodec::train: empty dataset");
    Adam opt(parameters(), cfg.learning_rate);
    TrainStats stats;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      double epoch_loss = 0.0;
      int nb = 0;
      for (size_t start = 0; start < dataset.size(); start += cfg.batch_size) {
        opt.zero_grad();
        size_t end = std::min(dataset.size(), start + static_cast<size_t>(cfg.batch_size));
        double batch_loss = 0.0;
        for (size_t i = start; i < end; ++i) {
          ag::Var x = ag::Var::constant(image_to_chw(dataset[i]));
          auto [Hg, Wg] = latent_dims(dataset[i].h, dataset[i].w);
          ag::Var lat = encode_var(x);
          ag::Var rec = decode_var(lat, Hg, Wg);
          ag::Var loss = ag::scale(ag::mse(rec, x), 1.0 / static_cast<double>(end - start));
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

  void save(ParamBundle& b, const std::string& prefix = "semcodec") const {
    auto ps = parameters();
    for (size_t i = 0; i < ps.size(); ++i)
      b.put(prefix + "." + std::to_string(i), ps[i].val());
  }

  void load(const ParamBundle& b, const std::string& prefix = "semcodec") {
    init(0);
    auto ps = parameters();
    for (size_t i = 0; i < ps.size(); ++i) {
      const NdArray& a = b.get(prefix + "." + std::to_string(i));
      if (a.shape != ps[i].shape())
        throw ConfigError("SemCodec::load: shape mismatch at entry " + std::to_string(i));
      ps[i].val() = a;
    }
  }

  const std::vector<SwinBlockParams>& encoder_stage0_blocks() const { return enc_s0_; }

 private:
  void check_finite() const {
    for (const auto& p : parameters())
      for (double v : p.val().data)
        if (!std::isfinite(v)) throw NumericalError("SemCodec: non-finite parameters");
  }

  SemCodecConfig cfg_;
  ag::Var embed_w_, embed_b_, merge_w_, merge_b_, enc_ln_g_, enc_ln_b_, proj_w_, proj_b_;
  ag::Var unproj_w_, unproj_b_, unmerge_w_, unmerge_b_, unembed_w_, unembed_b_;
  std::vector<SwinBlockParams> enc_s0_, enc_s1_, dec_s1_, dec_s0_;
};

}  // namespace irst
