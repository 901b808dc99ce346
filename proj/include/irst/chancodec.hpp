#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "irst/autograd.hpp"
#include "irst/channel.hpp"
#include "irst/errors.hpp"
#include "irst/optim.hpp"
#include "irst/params.hpp"

namespace irst {

struct SnrThresholds {
  double gamma1 = 3.0;
  double gamma2 = -3.0;
  double gamma_min = -10.0;
  double gamma_max = 10.0;

  void validate() const {
    if (!(gamma_min < gamma2 && gamma2 < gamma1 && gamma1 < gamma_max))
      throw ConfigError("SnrThresholds: require gamma_min < gamma2 < gamma1 < gamma_max");
  }
};

struct DepthSelection {
  int depth = 1;  // 1, 2 or 3
  double snr_db = 0.0;
};

// depth 1 if snr >= gamma1; 2 if gamma2 <= snr < gamma1; 3 below gamma2.
// Boundary SNRs take the shallower branch.
inline DepthSelection select_depth(double snr_db, const SnrThresholds& t) {
  t.validate();
  if (snr_db < t.gamma_min || snr_db > t.gamma_max)
    throw ConfigError("select_depth: SNR " + std::to_string(snr_db) + " outside [" +
                      std::to_string(t.gamma_min) + ", " + std::to_string(t.gamma_max) + "]");
  int d = snr_db >= t.gamma1 ? 1 : (snr_db >= t.gamma2 ? 2 : 3);
  return {d, snr_db};
}

struct StagedTrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  int epochs_per_stage = 10;
  uint64_t seed = 0;
  bool equalize = true;
};

struct StagedTrainStats {
  std::vector<std::vector<double>> stage_epoch_losses;  // [3][epochs]
  std::vector<std::vector<double>> stage_gammas;        // sampled SNR draws per stage
};

// Three nested encoder/decoder tiers, each two 3x3 convolutions with a
// rectified-linear unit between. Channel ladder 96 -> 64 -> 128 -> 256 and
// its mirror; the deepest active tier's output is transmitted.
class StackedChanCodec {
 public:
  explicit StackedChanCodec(int latent_channels = 96,
                            std::vector<int> widths = {64, 128, 256})
      : latent_c_(latent_channels), widths_(std::move(widths)) {
    if (widths_.size() != 3) throw ConfigError("StackedChanCodec: three tiers required");
  }

  void init(uint64_t seed) {
    Rng rng(seed);
    auto conv_pair = [&](int cin, int cmid, int cout) {
      TierParams t;
      t.wa = ag::Var::param(ag::xavier_uniform({cmid, cin, 3, 3}, cin * 9, cmid * 9, rng));
      t.ba = ag::Var::param(NdArray({cmid}));
      t.wb = ag::Var::param(ag::xavier_uniform({cout, cmid, 3, 3}, cmid * 9, cout * 9, rng));
      t.bb = ag::Var::param(NdArray({cout}));
      return t;
    };
    enc_.clear();
    dec_.clear();
    int prev = latent_c_;
    for (int i = 0; i < 3; ++i) {
      enc_.push_back(conv_pair(prev, widths_[i], widths_[i]));
      prev = widths_[i];
    }
    // dec_[i] mirrors enc_[i]: maps widths_[i] back toward the latent
    prev = latent_c_;
    for (int i = 0; i < 3; ++i) {
      dec_.push_back(conv_pair(widths_[i], widths_[i], prev));
      prev = widths_[i];
    }
  }

  std::vector<ag::Var> tier_parameters(int tier) const {  // tier in [0,3)
    const TierParams& e = enc_[tier];
    const TierParams& d = dec_[tier];
    return {e.wa, e.ba, e.wb, e.bb, d.wa, d.ba, d.wb, d.bb};
  }

  std::vector<ag::Var> parameters() const {
    std::vector<ag::Var> ps;
    for (int t = 0; t < 3; ++t)
      for (auto& v : tier_parameters(t)) ps.push_back(v);
    return ps;
  }

  ag::Var encode_var(const ag::Var& latent, int depth, bool normalize = true) const {
    check_depth(depth);
    if (latent.shape().size() != 3 || latent.shape()[0] != latent_c_)
      throw ShapeError("chan_encode: latent width must be " + std::to_string(latent_c_) +
                       ", got " + shape_str(latent.shape()));
    ag::Var x = latent;
    for (int t = 0; t < depth; ++t) {
      x = ag::conv2d(x, enc_[t].wa, enc_[t].ba);
      x = ag::relu(x);
      x = ag::conv2d(x, enc_[t].wb, enc_[t].bb);
      if (t + 1 < depth) x = ag::relu(x);
    }
    return normalize ? ag::power_normalize(x) : x;
  }

  ag::Var decode_var(const ag::Var& received, int depth) const {
    check_depth(depth);
    if (received.shape().size() != 3 || received.shape()[0] != widths_[depth - 1])
      throw ShapeError("chan_decode: expected width " + std::to_string(widths_[depth - 1]) +
                       " for depth " + std::to_string(depth) + ", got " +
                       shape_str(received.shape()));
    ag::Var x = received;
    for (int t = depth - 1; t >= 0; --t) {
      x = ag::conv2d(x, dec_[t].wa, dec_[t].ba);
      x = ag::relu(x);
      x = ag::conv2d(x, dec_[t].wb, dec_[t].bb);
      if (t > 0) x = ag::relu(x);
    }
    return x;
  }

  NdArray chan_encode(const NdArray& latent, int depth, bool normalize = true) const {
    return encode_var(ag::Var::constant(latent), depth, normalize).val();
  }

  NdArray chan_decode(const NdArray& received, int depth) const {
    return decode_var(ag::Var::constant(received), depth).val();
  }

  // Progressive freeze-and-extend training. Stage s trains only tier s;
  // earlier tiers stay bitwise frozen. Per-stage SNR intervals:
  //   stage 1: (gamma_min, gamma_max), stage 2: (gamma_min, gamma1),
  //   stage 3: (gamma_min, gamma2).
  StagedTrainStats staged_train(const std::vector<NdArray>& latents,
                                const SnrThresholds& th, const ChannelParams& chan,
                                const StagedTrainConfig& cfg) {
    th.validate();
    if (latents.empty()) throw ConfigError("staged_train: empty latent dataset");
    StagedTrainStats stats;
    stats.stage_epoch_losses.resize(3);
    stats.stage_gammas.resize(3);
    Rng rng(derive_seed(cfg.seed, 0xC0DEC));
    const double hi[3] = {th.gamma_max, th.gamma1, th.gamma2};
    for (int stage = 0; stage < 3; ++stage) {
      std::vector<std::vector<double>> frozen_before;
      for (int t = 0; t < stage; ++t)
        for (auto& p : tier_parameters(t)) frozen_before.push_back(p.val().data);
      Adam opt(tier_parameters(stage), cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay);
      int depth = stage + 1;
      for (int epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
        double epoch_loss = 0.0;
        for (const auto& lat : latents) {
          double gamma = rng.uniform(th.gamma_min, hi[stage]);
          stats.stage_gammas[stage].push_back(gamma);
          ChannelDraw draw = sample_gain(chan, rng.engine()(), 1)[0];
          NoiseSpec noise = NoiseSpec::from_snr_db(gamma);

          opt.zero_grad();
          ag::Var x = ag::Var::constant(lat);
          ag::Var y = encode_var(x, depth);
          // fading + noise with perfect-CSI equalization: y + n / h
          NdArray n(y.shape());
          double sd = std::sqrt(noise.sigma2);
          double h = std::max(draw.amplitude, 1e-12);
          for (auto& v : n.data) v = rng.normal(0.0, sd);
          ag::Var received;
          if (cfg.equalize) {
            // (h*y + n)/h = y + n/h
            for (auto& v : n.data) v /= h;
            received = ag::add(y, ag::Var::constant(n));
          } else {
            received = ag::add(ag::scale(y, h), ag::Var::constant(n));
          }
          ag::Var decoded = decode_var(received, depth);
          ag::Var loss = ag::mse(decoded, x);
          ag::backward(loss);
          opt.step();
          epoch_loss += loss.val()[0];
        }
        stats.stage_epoch_losses[stage].push_back(epoch_loss / latents.size());
      }
      // freeze invariant: earlier tiers must be bitwise unchanged
      size_t fi = 0;
      for (int t = 0; t < stage; ++t)
        for (auto& p : tier_parameters(t))
          if (p.val().data != frozen_before[fi++])
            throw NumericalError("staged_train: frozen tier " + std::to_string(t + 1) +
                                 " changed during stage " + std::to_string(stage + 1));
    }
    return stats;
  }

  void save(ParamBundle& b, const std::string& prefix = "chancodec") const {
    auto ps = parameters();
    for (size_t i = 0; i < ps.size(); ++i)
      b.put(prefix + "." + std::to_string(i), ps[i].val());
  }

  void load(const ParamBundle& b, const std::string& prefix = "chancodec") {
    init(0);
    auto ps = parameters();
    for (size_t i = 0; i < ps.size(); ++i) {
      const NdArray& a = b.get(prefix + "." + std::to_string(i));
      if (a.shape != ps[i].shape())
        throw ConfigError("StackedChanCodec::load: shape mismatch at entry " + std::to_string(i));
      ps[i].val() = a;
    }
  }

  int latent_channels() const { return latent_c_; }
  const std::vector<int>& widths() const { return widths_; }

 private:
  static void check_depth(int depth) {
    if (depth < 1 || depth > 3) throw ConfigError("depth must be 1, 2 or 3");
  }

  struct TierParams {
    ag::Var wa, ba, wb, bb;
  };

  int latent_c_;
  std::vector<int> widths_;
  std::vector<TierParams> enc_, dec_;
};

}  // namespace irst
