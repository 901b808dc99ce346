// Acceptance gate: one self-contained check per shipped guarantee, each
// printed as a single [PASS]/[FAIL] line. Exit code 0 only when all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "irst/pipeline.hpp"

using namespace irst;
namespace afs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// ---- criterion 1: channel sampling fidelity ----
Outcome c1_channel_fidelity() {
  auto t0 = Clock::now();
  ChannelParams p;  // b0=0.158, m=19.4, omega=1.29
  const long n = 100000;
  auto draws = sample_gain(p, 42, n);
  double mean = 0.0;
  std::vector<double> r(draws.size());
  for (size_t i = 0; i < draws.size(); ++i) {
    r[i] = draws[i].power_gain;
    mean += r[i];
  }
  mean /= static_cast<double>(n);
  std::sort(r.begin(), r.end());
  SrCdf cdf(p, 40.0);
  double ks = 0.0;
  for (size_t i = 0; i < r.size(); ++i) {
    double f = cdf(r[i]);
    ks = std::max({ks, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
  }
  double expected = 2.0 * p.b0 + p.omega;
  double mean_err = std::abs(mean - expected) / expected;
  double el = seconds_since(t0);
  bool ok = ks < 0.01 && mean_err < 0.02 && el < 30.0;
  return {ok, fmt("KS=%.5f (<0.01), mean=%.4f vs %.4f (err %.2f%% < 2%%), %.1fs (<30s)",
                  ks, mean, expected, 100 * mean_err, el)};
}

// ---- criterion 2: hypergeometric and PDF oracles ----
Outcome c2_pdf_oracles() {
  ChannelParams p;
  bool f1_exact = hyp1f1(p.m, 1.0, 0.0) == 1.0;
  ChannelParams expo{0.37, 3.0, 0.0};
  double max_abs = 0.0;
  for (int i = 0; i <= 500; ++i) {
    double r = 5.0 * i / 500.0;
    double closed = std::exp(-r / (2.0 * expo.b0)) / (2.0 * expo.b0);
    max_abs = std::max(max_abs, std::abs(eval_pdf(expo, r) - closed));
  }
  double total = SrCdf(p, 40.0).total();
  bool ok = f1_exact && max_abs < 1e-9 && std::abs(total - 1.0) < 1e-6;
  return {ok, fmt("1F1(m,1,0)=1 %s, exp-form max err %.2e (<1e-9), integral %.8f (1±1e-6)",
                  f1_exact ? "exact" : "WRONG", max_abs, total)};
}

// ---- criterion 3: neighborhood-majority refinement exactness ----
Outcome c3_refinement_exactness() {
  auto pack = [](const Image& img, int i, int j) {
    return (uint32_t(to_u8(img.at(i, j, 0))) << 16) |
           (uint32_t(to_u8(img.at(i, j, 1))) << 8) | uint32_t(to_u8(img.at(i, j, 2)));
  };
  auto oracle = [&](const Image& in) {
    Image out = in;
    for (int i = 1; i < in.h - 1; ++i)
      for (int j = 1; j < in.w - 1; ++j) {
        std::map<uint32_t, int> counts;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            if (di || dj) ++counts[pack(in, i + di, j + dj)];
        for (const auto& [color, cnt] : counts)
          if (cnt >= 7) {
            out.at(i, j, 0) = ((color >> 16) & 0xff) / 255.0;
            out.at(i, j, 1) = ((color >> 8) & 0xff) / 255.0;
            out.at(i, j, 2) = (color & 0xff) / 255.0;
          }
      }
    return out;
  };

  int mismatches = 0, border_changes = 0, stability_failures = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::array<std::array<uint8_t, 3>, 4> palette;
    for (auto& c : palette)
      c = {static_cast<uint8_t>(rng.uniform_int(0, 255)),
           static_cast<uint8_t>(rng.uniform_int(0, 255)),
           static_cast<uint8_t>(rng.uniform_int(0, 255))};
    Image img(16, 16, 3);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        auto& c = palette[static_cast<size_t>(rng.uniform_int(0, 3))];
        for (int k = 0; k < 3; ++k) img.at(i, j, k) = c[static_cast<size_t>(k)] / 255.0;
      }
    Image got = sme_refine(img);
    if (got.data != oracle(img).data) ++mismatches;
    for (int j = 0; j < 16; ++j)
      for (int k = 0; k < 3; ++k)
        if (got.at(0, j, k) != img.at(0, j, k) || got.at(15, j, k) != img.at(15, j, k))
          ++border_changes;
    // iterate to a fixed point, then one more pass must change nothing
    Image cur = got;
    for (int it = 0; it < 32; ++it) {
      Image next = sme_refine(cur);
      if (next.data == cur.data) break;
      cur = std::move(next);
    }
    if (sme_refine(cur).data != cur.data) ++stability_failures;
  }
  bool ok = mismatches == 0 && border_changes == 0 && stability_failures == 0;
  return {ok, fmt("oracle mismatches %d/100, border edits %d, post-fixed-point edits %d",
                  mismatches, border_changes, stability_failures)};
}

// ---- criterion 4: effect regressor correctness ----
Outcome c4_regressor() {
  auto t0 = Clock::now();
  double worst_rel = 0.0;
  for (uint64_t inst = 0; inst < 10; ++inst) {
    Rng rng(100 + inst);
    std::vector<TrainSample> s;
    for (int i = 0; i < 25; ++i)
      s.push_back({{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)}, rng.uniform(-5.0, 45.0)});
    EvalModel m{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    auto g = eval_gradient(m, s);
    const double h = 1e-6;
    double* ws[3] = {&m.w0, &m.w1, &m.w2};
    for (int i = 0; i < 3; ++i) {
      double saved = *ws[i];
      *ws[i] = saved + h;
      double up = eval_loss(m, s);
      *ws[i] = saved - h;
      double dn = eval_loss(m, s);
      *ws[i] = saved;
      double fd = (up - dn) / (2.0 * h);
      worst_rel = std::max(worst_rel, std::abs(g[i] - fd) / std::max({std::abs(fd), 1.0}));
    }
  }

  // noiseless linear data: gradient descent vs the exact generating weights
  // (= the closed-form least-squares solution when residuals are zero)
  Rng rng(7);
  std::vector<TrainSample> s;
  double w0 = 12.0, w1 = 6.0, w2 = -3.0;
  for (int i = 0; i < 60; ++i) {
    EvalFeatures f{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    s.push_back({f, w0 + w1 * f.x_s + w2 * f.x_c});
  }
  EvalModel fit = fit_eval(s, 0.2, 30000);
  double wrel = std::max({std::abs(fit.w0 - w0) / std::abs(w0),
                          std::abs(fit.w1 - w1) / std::abs(w1),
                          std::abs(fit.w2 - w2) / std::abs(w2)});
  double el = seconds_since(t0);
  bool ok = worst_rel < 1e-6 && wrel < 0.01 && el < 10.0;
  return {ok, fmt("grad rel err %.2e (<1e-6), fit weight err %.3f%% (<1%%), %.1fs (<10s)",
                  worst_rel, 100 * wrel, el)};
}

// ---- criterion 5: metric oracles ----
Outcome c5_metrics() {
  Image z(8, 8, 1, 0.0), one(8, 8, 1, 1.0), half(8, 8, 1, 0.5);
  double p0 = psnr(z, one);                      // full-range error -> 0 dB
  double pq = psnr(z, half);                     // quarter of max^2 MSE -> 10*log10(4)
  double want_q = 10.0 * std::log10(4.0);
  Image a(12, 12, 3);
  Rng rng(5);
  for (auto& v : a.data) v = rng.uniform(0.0, 1.0);
  Image b = a;
  for (auto& v : b.data) v = std::clamp(v + rng.uniform(-0.1, 0.1), 0.0, 1.0);
  double s_ident = ssim(a, a);
  double sym = std::abs(ssim(a, b) - ssim(b, a));
  Image ca(8, 8, 1, 100.0 / 255.0), cb(8, 8, 1, 150.0 / 255.0);
  double c1 = 6.5025;
  double want_const = (2.0 * 100 * 150 + c1) / (100.0 * 100 + 150.0 * 150 + c1);
  double got_const = ssim(ca, cb);
  bool ok = std::abs(p0) < 1e-6 && std::abs(pq - want_q) < 1e-6 &&
            s_ident == 1.0 && sym < 1e-12 && std::abs(got_const - want_const) < 1e-9;
  return {ok, fmt("PSNR %.7f dB (0), %.6f dB (%.6f), SSIM self %.12f, asym %.1e, "
                  "const-case err %.1e", p0, pq, want_q, s_ident, sym,
                  std::abs(got_const - want_const))};
}

// ---- criterion 6: depth gating thresholds ----
Outcome c6_depth_gating() {
  SnrThresholds t;  // gamma1 = 3, gamma2 = -3
  struct { double snr; int depth; } cases[] = {{5, 1}, {0, 2}, {-5, 3}, {3, 1}, {-3, 2}};
  std::string bad;
  for (auto c : cases) {
    int got = select_depth(c.snr, t).depth;
    if (got != c.depth) bad += fmt(" %g->%d(want %d)", c.snr, got, c.depth);
  }
  return {bad.empty(), bad.empty() ? "5->1, 0->2, -5->3, 3->1, -3->2 all exact"
                                   : "wrong:" + bad};
}

// ---- criterion 7: staged-training freeze invariant ----
Outcome c7_freeze_invariant() {
  StackedChanCodec codec(4, {6, 8, 10});
  codec.init(3);
  std::vector<NdArray> latents;
  Rng rng(4);
  for (int s = 0; s < 4; ++s) {
    NdArray a({4, 4, 4});
    for (auto& v : a.data) v = rng.uniform(-1.0, 1.0);
    latents.push_back(std::move(a));
  }
  SnrThresholds th;
  StagedTrainConfig cfg;
  cfg.epochs_per_stage = 5;
  cfg.seed = 9;
  // staged_train throws if a frozen tier changes bitwise between stages
  StagedTrainStats stats;
  try {
    stats = codec.staged_train(latents, th, ChannelParams{}, cfg);
  } catch (const std::exception& e) {
    return {false, std::string("freeze violated: ") + e.what()};
  }
  const double hi[3] = {th.gamma_max, th.gamma1, th.gamma2};
  long outside = 0;
  for (int s = 0; s < 3; ++s)
    for (double g : stats.stage_gammas[s])
      if (g < th.gamma_min || g > hi[s]) ++outside;
  return {outside == 0,
          fmt("frozen tiers bitwise stable across 3 stages; %ld/%zu SNR draws outside "
              "their stage interval", outside,
              stats.stage_gammas[0].size() + stats.stage_gammas[1].size() +
                  stats.stage_gammas[2].size())};
}

// ---- criterion 8: stacking benefit at low SNR ----
Outcome c8_stacking_benefit() {
  auto t0 = Clock::now();
  // Latents come from a frozen randomly-initialized semantic encoder: the
  // comparison isolates the channel codec, measured in the latent domain.
  SemCodec sem;
  sem.init(17);
  auto scenes = generate_synthetic(32, 64, 3, 23);
  std::vector<NdArray> latents;
  for (const auto& sc : scenes) latents.push_back(sem.sem_encode(sc.image));

  StackedChanCodec codec;  // 96 -> 64/128/256
  codec.init(29);
  SnrThresholds th;
  ChannelParams chan;
  StagedTrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs_per_stage = 10;
  cfg.seed = 31;
  codec.staged_train(latents, th, chan, cfg);

  // common random numbers: one channel draw + noise seed per (scene, snr),
  // shared between the depth-1 and depth-3 arms
  auto latent_db = [](const NdArray& ref, const NdArray& dec) {
    double num = 0.0, den = 0.0;
    for (long i = 0; i < ref.numel(); ++i) {
      num += ref[i] * ref[i];
      double d = ref[i] - dec[i];
      den += d * d;
    }
    return 10.0 * std::log10(num / den);
  };
  const double gammas[4] = {-10.0, -8.0, -6.0, -4.0};
  double sum1 = 0.0, sum3 = 0.0;
  long count = 0;
  for (size_t i = 0; i < latents.size(); ++i)
    for (double g : gammas) {
      uint64_t ds = derive_seed(1000, i, static_cast<uint64_t>(-g));
      uint64_t ns = derive_seed(2000, i, static_cast<uint64_t>(-g));
      ChannelDraw draw = sample_gain(chan, ds, 1)[0];
      NoiseSpec noise = NoiseSpec::from_snr_db(g);
      for (int depth : {1, 3}) {
        NdArray tx = codec.chan_encode(latents[i], depth);
        NdArray rx = apply_channel(tx, draw, noise, ns, true);
        double db = latent_db(latents[i], codec.chan_decode(rx, depth));
        (depth == 1 ? sum1 : sum3) += db;
      }
      ++count;
    }
  double mean1 = sum1 / count, mean3 = sum3 / count;
  double gain = mean3 - mean1;
  double el = seconds_since(t0);
  bool ok = gain >= 0.3 && el < 1800.0;
  return {ok, fmt("depth-3 %.3f dB vs depth-1 %.3f dB over {-10,-8,-6,-4} dB: gain %.3f dB "
                  "(>=0.3), %.0fs (<1800s)", mean3, mean1, gain, el)};
}

// ---- criterion 9: selection payload/quality trade-off ----
Outcome c9_selection_tradeoff() {
  auto scenes = generate_synthetic(16, 64, 3, 41);
  ExperimentConfig cfg;
  cfg.passthrough_codecs = true;
  cfg.use_ground_truth_masks = true;
  cfg.task.task_classes = {1};

  ModelSet blur_models, full_models;
  blur_models.colors = ColorMap::default_palette(3);
  full_models.colors = ColorMap::default_palette(3);
  blur_models.eval_model = {27.0, 0.0, 0.0};   // mid tier: kernel 9
  full_models.eval_model = {100.0, 0.0, 0.0};  // top tier: no blur

  double ratio_sum = 0.0, worst_task_diff = 0.0;
  long identical_violations = 0;
  for (size_t i = 0; i < scenes.size(); ++i) {
    const auto& sc = scenes[i];
    auto mb = run_transmission(sc.image, blur_models, 10.0, cfg, &sc.map, i);
    auto mf = run_transmission(sc.image, full_models, 10.0, cfg, &sc.map, i);
    if (mb.report.tier != 2 || mf.report.tier != 4)
      return {false, fmt("unexpected tiers %d/%d", mb.report.tier, mf.report.tier)};
    ratio_sum += double(mb.report.payload_bytes) / double(mf.report.payload_bytes);
    // pre-channel: task pixels bit-identical to the source
    for (int r = 0; r < sc.image.h; ++r)
      for (int c = 0; c < sc.image.w; ++c)
        if (mb.selected.mask[static_cast<size_t>(r) * sc.image.w + c])
          for (int k = 0; k < 3; ++k)
            if (mb.selected.pixels.at(r, c, k) != sc.image.at(r, c, k))
              ++identical_violations;
    worst_task_diff = std::max(
        worst_task_diff, std::abs(mb.report.task_psnr_db - mf.report.task_psnr_db));
  }
  double mean_ratio = ratio_sum / static_cast<double>(scenes.size());
  bool ok = mean_ratio <= 0.85 && identical_violations == 0 && worst_task_diff <= 0.5;
  return {ok, fmt("payload ratio %.3f (<=0.85), task-pixel mismatches %ld, "
                  "task PSNR delta %.4f dB (<=0.5) at 10 dB SNR",
                  mean_ratio, identical_violations, worst_task_diff)};
}

// ---- criterion 10: neural invariants ----
Outcome c10_neural_invariants() {
  Rng rng(51);
  // attention rows are probability distributions
  SwinBlockParams p;
  p.init(8, 16, 0, 2, false, rng);
  NdArray toks({16, 8});
  for (auto& v : toks.data) v = rng.uniform(-1.0, 1.0);
  NdArray probs;
  window_attention(ag::Var::constant(toks), 4, 4, {4, 2}, p, &probs);
  double worst_row = 0.0;
  for (int r = 0; r < 2 * 16; ++r) {
    double s = 0.0;
    for (int t = 0; t < 16; ++t) s += probs[static_cast<long>(r) * 16 + t];
    worst_row = std::max(worst_row, std::abs(s - 1.0));
  }

  // cyclic shift round-trip is an exact permutation inverse
  bool shift_exact = true;
  auto fwd = semdetail::roll_index(8, 8, 3, 2, 2);
  auto bwd = semdetail::roll_index(8, 8, 3, -2, -2);
  for (size_t i = 0; i < fwd.size(); ++i)
    if (bwd[static_cast<size_t>(fwd[i])] != static_cast<long>(i)) shift_exact = false;

  // channel-ladder shapes 96 -> 64 -> 128 -> 256 and mirror
  StackedChanCodec codec;
  codec.init(52);
  NdArray lat({96, 4, 4});
  for (auto& v : lat.data) v = rng.uniform(-1.0, 1.0);
  bool shapes_ok = codec.chan_encode(lat, 1).shape == Shape{64, 4, 4} &&
                   codec.chan_encode(lat, 2).shape == Shape{128, 4, 4} &&
                   codec.chan_encode(lat, 3).shape == Shape{256, 4, 4} &&
                   codec.chan_decode(codec.chan_encode(lat, 3), 3).shape == lat.shape;

  // tiny-block analytic gradient vs central finite differences
  SwinBlockParams tp;
  Rng rng2(53);
  tp.init(2, 16, 0, 1, true, rng2);
  ag::Var x = ag::Var::param(NdArray({16, 2}));
  for (auto& v : x.val().data) v = rng2.uniform(-0.5, 0.5);
  NdArray tgt({16, 2});
  for (auto& v : tgt.data) v = rng2.uniform(-0.5, 0.5);
  ag::Var target = ag::Var::constant(tgt);
  auto build = [&] { return ag::mse(window_attention(x, 4, 4, {4, 2}, tp), target); };
  double worst_grad = 0.0;
  for (ag::Var param : {x, tp.wq, tp.ln1_g}) {
    param.zero_grad();
    ag::Var loss = build();
    ag::backward(loss);
    auto analytic = param.grad();
    const double h = 1e-6;
    for (long i = 0; i < param.numel(); ++i) {
      double saved = param.val()[i];
      param.val()[i] = saved + h;
      double up = build().val()[0];
      param.val()[i] = saved - h;
      double dn = build().val()[0];
      param.val()[i] = saved;
      double fd = (up - dn) / (2.0 * h);
      worst_grad = std::max(worst_grad,
                            std::abs(analytic[i] - fd) / std::max({std::abs(fd), 1e-6}));
    }
  }
  bool ok = worst_row < 1e-5 && shift_exact && shapes_ok && worst_grad < 1e-4;
  return {ok, fmt("attention row err %.1e (<1e-5), shift round-trip %s, ladder shapes %s, "
                  "grad rel err %.2e (<1e-4)", worst_row, shift_exact ? "exact" : "BROKEN",
                  shapes_ok ? "ok" : "WRONG", worst_grad)};
}

// ---- criterion 11: end-to-end sweep smoke ----
Outcome c11_sweep_smoke() {
  auto t0 = Clock::now();
  auto scenes = generate_synthetic(6, 32, 3, 61);
  std::vector<std::pair<Image, SegmentationMap>> ds;
  for (auto& s : scenes) ds.emplace_back(s.image, s.map);
  ExperimentConfig cfg;
  cfg.passthrough_codecs = true;
  cfg.use_ground_truth_masks = true;
  cfg.task.task_classes = {1};
  ModelSet models;
  models.colors = ColorMap::default_palette(3);
  models.eval_model = {100.0, 0.0, 0.0};

  std::string d1 = "/tmp/irst_acceptance_sweep1", d2 = "/tmp/irst_acceptance_sweep2";
  afs::remove_all(d1);
  afs::remove_all(d2);
  std::vector<double> grid = {-10, -5, 0, 5, 10};
  SweepResult r = sweep_snr(ds, models, grid, cfg, d1);
  sweep_snr(ds, models, grid, cfg, d2);

  auto slurp = [](const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
  };
  bool files_ok = true;
  for (const char* f : {"manifest.json", "metrics.csv", "summary.csv",
                        "psnr_vs_snr.png", "ssim_vs_snr.png"})
    files_ok = files_ok && afs::exists(d1 + "/" + std::string(f)) &&
               afs::file_size(d1 + "/" + std::string(f)) > 0;

  std::istringstream mcsv(slurp(d1 + "/metrics.csv"));
  std::string line;
  std::getline(mcsv, line);
  bool header_ok = line == "run_id,snr_db,depth,tier,psnr_db,task_psnr_db,ssim,payload_bytes";
  long rows = 0;
  while (std::getline(mcsv, line))
    if (!line.empty()) ++rows;
  bool rows_ok = rows == static_cast<long>(grid.size() * ds.size());

  double worst_drop = 0.0;
  for (size_t i = 1; i < r.mean_psnr.size(); ++i)
    worst_drop = std::max(worst_drop, r.mean_psnr[i - 1] - r.mean_psnr[i]);

  bool identical = slurp(d1 + "/metrics.csv") == slurp(d2 + "/metrics.csv");
  double el = seconds_since(t0);
  bool ok = files_ok && header_ok && rows_ok && worst_drop <= 0.2 && identical && el < 600.0;
  return {ok, fmt("outputs %s, CSV %s (%ld rows), worst PSNR drop %.3f dB (<=0.2), "
                  "rerun %s, %.0fs (<600s)", files_ok ? "present" : "MISSING",
                  header_ok && rows_ok ? "well-formed" : "MALFORMED", rows,
                  worst_drop, identical ? "bit-identical" : "DIFFERS", el)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"channel fidelity (KS, mean, runtime)", c1_channel_fidelity},
      {"hypergeometric and PDF oracles", c2_pdf_oracles},
      {"neighborhood refinement exactness", c3_refinement_exactness},
      {"effect regressor gradient and fit", c4_regressor},
      {"PSNR/SSIM metric oracles", c5_metrics},
      {"SNR depth gating thresholds", c6_depth_gating},
      {"staged-training freeze invariant", c7_freeze_invariant},
      {"stacking benefit at low SNR", c8_stacking_benefit},
      {"selection payload/quality trade-off", c9_selection_tradeoff},
      {"neural invariants", c10_neural_invariants},
      {"end-to-end sweep smoke", c11_sweep_smoke},
  };
  int failures = 0;
  int idx = 0;
  for (const auto& c : criteria) {
    ++idx;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] criterion %d: %s -- %s\n", o.ok ? "PASS" : "FAIL", idx, c.name,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.ok) ++failures;
  }
  if (failures) std::printf("%d of 11 criteria failed\n", failures);
  else std::printf("all 11 criteria passed\n");
  return failures == 0 ? 0 : 1;
}
