#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "irst/chancodec.hpp"
#include "irst/random.hpp"

using namespace irst;

namespace {

NdArray random_latent(int c, int h, int w, uint64_t seed) {
  Rng rng(seed);
  NdArray a({c, h, w});
  for (auto& v : a.data) v = rng.uniform(-1.0, 1.0);
  return a;
}

}  // namespace

TEST_CASE("depth selection follows the SNR thresholds") {
  SnrThresholds t;  // gamma1=3, gamma2=-3, range [-10,10]
  CHECK(select_depth(10.0, t).depth == 1);
  CHECK(select_depth(5.0, t).depth == 1);
  CHECK(select_depth(0.0, t).depth == 2);
  CHECK(select_depth(-5.0, t).depth == 3);
  CHECK(select_depth(-10.0, t).depth == 3);
  // boundaries take the shallower branch
  CHECK(select_depth(3.0, t).depth == 1);
  CHECK(select_depth(-3.0, t).depth == 2);
  CHECK_THROWS_AS(select_depth(10.5, t), ConfigError);
  CHECK_THROWS_AS(select_depth(-10.5, t), ConfigError);
}

TEST_CASE("threshold validation enforces the ordering") {
  SnrThresholds bad{-3.0, 3.0, -10.0, 10.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  SnrThresholds bad2{3.0, -3.0, -2.0, 10.0};
  CHECK_THROWS_AS(bad2.validate(), ConfigError);
}

TEST_CASE("encoder widths follow the tier ladder and decoder inverts shapes") {
  StackedChanCodec codec(6, {8, 12, 16});
  codec.init(1);
  NdArray lat = random_latent(6, 4, 4, 2);
  for (int depth = 1; depth <= 3; ++depth) {
    NdArray tx = codec.chan_encode(lat, depth);
    const int expect[3] = {8, 12, 16};
    REQUIRE(tx.shape == Shape{expect[depth - 1], 4, 4});
    NdArray rec = codec.chan_decode(tx, depth);
    REQUIRE(rec.shape == lat.shape);
  }
  CHECK_THROWS_AS(codec.chan_encode(lat, 0), ConfigError);
  CHECK_THROWS_AS(codec.chan_encode(lat, 4), ConfigError);
  CHECK_THROWS_AS(codec.chan_encode(random_latent(5, 4, 4, 3), 1), ShapeError);
  CHECK_THROWS_AS(codec.chan_decode(random_latent(12, 4, 4, 3), 1), ShapeError);
}

TEST_CASE("transmitted signal has unit average power at every depth") {
  StackedChanCodec codec(6, {8, 12, 16});
  codec.init(4);
  NdArray lat = random_latent(6, 4, 4, 5);
  for (int depth = 1; depth <= 3; ++depth) {
    NdArray tx = codec.chan_encode(lat, depth);
    double p = 0.0;
    for (double v : tx.data) p += v * v;
    p /= static_cast<double>(tx.numel());
    CHECK(p == Catch::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("zero latent with zero bias cannot be power-normalized") {
  StackedChanCodec codec(6, {8, 12, 16});
  codec.init(6);  // biases start at zero, so a zero latent stays zero
  NdArray zero({6, 4, 4});
  CHECK_THROWS_AS(codec.chan_encode(zero, 1), NumericalError);
  CHECK_NOTHROW(codec.chan_encode(zero, 1, false));
}

TEST_CASE("default construction matches the 96 -> 64/128/256 ladder") {
  StackedChanCodec codec;
  codec.init(7);
  NdArray lat = random_latent(96, 2, 2, 8);
  CHECK(codec.chan_encode(lat, 3).shape == Shape{256, 2, 2});
  CHECK(codec.latent_channels() == 96);
  CHECK(codec.widths() == std::vector<int>{64, 128, 256});
}

TEST_CASE("staged training freezes earlier tiers and reduces loss") {
  StackedChanCodec codec(4, {6, 8, 10});
  codec.init(9);
  std::vector<NdArray> latents;
  for (uint64_t s = 0; s < 4; ++s) latents.push_back(random_latent(4, 4, 4, 10 + s));

  SnrThresholds th;
  ChannelParams chan;
  StagedTrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.epochs_per_stage = 25;
  cfg.seed = 3;

  auto tier1_before = codec.tier_parameters(0);
  std::vector<std::vector<double>> snap;
  for (auto& p : tier1_before) snap.push_back(p.val().data);

  StagedTrainStats stats = codec.staged_train(latents, th, chan, cfg);

  REQUIRE(stats.stage_epoch_losses.size() == 3);
  for (int s = 0; s < 3; ++s) {
    const auto& ls = stats.stage_epoch_losses[s];
    REQUIRE(ls.size() == 25);
    // channel noise makes single epochs jittery; compare leading/trailing means
    double head = (ls[0] + ls[1] + ls[2]) / 3.0;
    double tail = (ls[22] + ls[23] + ls[24]) / 3.0;
    CHECK(tail < head);
  }

  // tier 1 was trained in stage 1, then stayed bitwise frozen afterwards; the
  // codec itself verifies this, but confirm it did move during its own stage
  bool moved = false;
  auto tier1_after = codec.tier_parameters(0);
  for (size_t i = 0; i < snap.size(); ++i)
    if (tier1_after[i].val().data != snap[i]) moved = true;
  CHECK(moved);

  // per-stage SNR draws live in the documented narrowing intervals
  const double hi[3] = {th.gamma_max, th.gamma1, th.gamma2};
  for (int s = 0; s < 3; ++s) {
    REQUIRE(!stats.stage_gammas[s].empty());
    for (double g : stats.stage_gammas[s]) {
      REQUIRE(g >= th.gamma_min);
      REQUIRE(g <= hi[s]);
    }
  }
}

TEST_CASE("staged training is deterministic per seed") {
  std::vector<NdArray> latents = {random_latent(4, 4, 4, 1)};
  SnrThresholds th;
  ChannelParams chan;
  StagedTrainConfig cfg;
  cfg.epochs_per_stage = 2;
  cfg.seed = 5;
  StackedChanCodec a(4, {6, 8, 10}), b(4, {6, 8, 10});
  a.init(2);
  b.init(2);
  a.staged_train(latents, th, chan, cfg);
  b.staged_train(latents, th, chan, cfg);
  auto pa = a.parameters(), pb = b.parameters();
  for (size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i].val().data == pb[i].val().data);
}

TEST_CASE("codec state survives a save/load round trip") {
  StackedChanCodec a(4, {6, 8, 10});
  a.init(11);
  ParamBundle b;
  a.save(b);
  StackedChanCodec c(4, {6, 8, 10});
  c.load(b);
  NdArray lat = random_latent(4, 4, 4, 12);
  CHECK(a.chan_encode(lat, 3).data == c.chan_encode(lat, 3).data);
}
