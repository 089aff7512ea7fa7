#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ctr/simulator.hpp"
#include "ctr/stft.hpp"
#include "test_util.hpp"

using ctr::MixtureSet;
using ctr::RoomSpec;
using ctr::SceneConfig;
using ctr::Spectrogram;

namespace {

// residual of "mixture = sum of images + noise" relative to mixture energy
double identity_residual(const Spectrogram& mix,
                         const std::vector<const Spectrogram*>& parts) {
  Spectrogram acc(mix.frames(), mix.bins(), mix.sample_rate(), mix.window_ms(),
                  mix.hop_ms());
  for (const auto* p : parts)
    for (std::size_t i = 0; i < acc.raw().size(); ++i)
      acc.raw()[i] += p->raw()[i];
  return ctrtest::diff_energy(mix, acc) /
         std::max(ctrtest::spec_energy(mix), 1e-300);
}

double signal_energy_of(const Spectrogram& s, const ctr::StftConfig& cfg,
                        std::size_t n) {
  return ctrtest::energy(ctr::istft(s, cfg, n));
}

}  // namespace

TEST_CASE("each mixture equals the sum of its images plus noise") {
  SceneConfig cfg = ctrtest::small_scene(101, 1.0, 2, 1);
  const MixtureSet set = ctr::simulate_scene(cfg);
  REQUIRE(set.ground_truth.has_value());
  const auto& gt = *set.ground_truth;

  for (std::size_t d = 0; d < 2; ++d) {
    std::vector<const Spectrogram*> parts;
    for (std::size_t c = 0; c < 2; ++c) parts.push_back(&gt.close_talk_images[d][c]);
    parts.push_back(&gt.close_talk_noise[d]);
    CHECK(identity_residual(set.close_talk[d], parts) <= 1e-18);
  }
  for (std::size_t a = 0; a < set.far_field.size(); ++a)
    for (std::size_t m = 0; m < set.far_field[a].size(); ++m) {
      std::vector<const Spectrogram*> parts;
      for (std::size_t c = 0; c < 2; ++c) parts.push_back(&gt.far_images[a][m][c]);
      parts.push_back(&gt.far_noise[a][m]);
      CHECK(identity_residual(set.far_field[a][m], parts) <= 1e-18);
    }
}

TEST_CASE("simulation is deterministic for a fixed seed") {
  SceneConfig cfg = ctrtest::small_scene(77, 0.8, 2, 1);
  const MixtureSet a = ctr::simulate_scene(cfg);
  const MixtureSet b = ctr::simulate_scene(cfg);
  for (std::size_t d = 0; d < a.close_talk.size(); ++d)
    CHECK(ctrtest::diff_energy(a.close_talk[d], b.close_talk[d]) == 0.0);
  for (std::size_t m = 0; m < a.far_field[0].size(); ++m)
    CHECK(ctrtest::diff_energy(a.far_field[0][m], b.far_field[0][m]) == 0.0);
  CHECK(a.activity.sample_activity == b.activity.sample_activity);

  SceneConfig other = cfg;
  other.seed = 78;
  const MixtureSet c = ctr::simulate_scene(other);
  CHECK(ctrtest::diff_energy(a.close_talk[0], c.close_talk[0]) > 0.0);
}

TEST_CASE("a silent provided source yields silent images") {
  SceneConfig cfg = ctrtest::small_scene(5, 0.5, 2, 0);
  const std::size_t n = static_cast<std::size_t>(cfg.duration_s * 16000.0);
  ctr::Rng rng(9);
  std::vector<std::vector<double>> src(2, std::vector<double>(n, 0.0));
  for (auto& v : src[0]) v = rng.normal();

  const MixtureSet set = ctr::simulate_scene(cfg, src);
  const auto& gt = *set.ground_truth;
  CHECK(ctrtest::spec_energy(gt.close_talk_speech[0]) > 0.0);
  CHECK(ctrtest::spec_energy(gt.close_talk_speech[1]) == 0.0);
  CHECK(ctrtest::spec_energy(gt.far_images[0][0][1]) == 0.0);
  // mic 1 hears only cross-talk from speaker 0
  CHECK(ctrtest::diff_energy(set.close_talk[1], gt.close_talk_images[1][0]) ==
        0.0);

  std::vector<std::vector<double>> bad(1, std::vector<double>(n, 0.0));
  CHECK_THROWS(ctr::simulate_scene(cfg, bad));
}

TEST_CASE("noise is scaled to the requested far-field SNR") {
  for (double target : {-6.0, 0.0, 8.0}) {
    SceneConfig cfg = ctrtest::small_scene(400 + static_cast<int>(target), 1.0,
                                           2, 1);
    cfg.snr_db_min = target;
    cfg.snr_db_max = target;  // collapse the range so the draw is exact
    const MixtureSet set = ctr::simulate_scene(cfg);
    const auto& gt = *set.ground_truth;

    double speech = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
      speech += signal_energy_of(gt.direct_path[0][0][c], cfg.stft,
                                 set.num_samples);
    const double noise =
        signal_energy_of(gt.far_noise[0][0], cfg.stft, set.num_samples);
    REQUIRE(noise > 0.0);
    const double got = 10.0 * std::log10(speech / noise);
    CHECK(std::abs(got - target) <= 0.1);
  }
}

TEST_CASE("own speech dominates cross-talk at the close-talk mic") {
  int dominant = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneConfig cfg = ctrtest::small_scene(600 + seed, 0.7, 2, 0);
    const MixtureSet set = ctr::simulate_scene(cfg);
    const auto& gt = *set.ground_truth;
    bool ok = true;
    for (std::size_t d = 0; d < 2; ++d) {
      const double own = ctrtest::spec_energy(gt.close_talk_images[d][d]);
      const double cross = ctrtest::spec_energy(gt.close_talk_images[d][1 - d]);
      ok &= own > cross;
    }
    if (ok) ++dominant;
  }
  CHECK(dominant >= 15);
}

TEST_CASE("impulse response model") {
  const RoomSpec room{0.3, 16000.0};
  CHECK_THROWS(ctr::simulate_rir(0.0, room, 1));

  const RoomSpec dry{0.0, 16000.0};
  const ctr::Rir d1 = ctr::simulate_rir(1.0, dry, 1);
  CHECK(d1.taps.size() == d1.direct_delay + 1);
  CHECK(d1.taps[d1.direct_delay] == doctest::Approx(1.0));
  CHECK(d1.direct_delay == 47);  // 1 m at 343 m/s, 16 kHz

  const ctr::Rir d2 = ctr::simulate_rir(2.0, dry, 1);
  CHECK(d2.direct_gain == doctest::Approx(0.5));
  CHECK(d2.direct_delay == 93);

  // reverberant tail carries roughly the configured relative energy
  const double tail_scale = 0.4;
  const ctr::Rir r = ctr::simulate_rir(1.5, room, 7, tail_scale);
  double tail_e = 0.0;
  for (std::size_t i = r.direct_delay + 1; i < r.taps.size(); ++i)
    tail_e += r.taps[i] * r.taps[i];
  const double want = tail_scale * tail_scale * r.direct_gain * r.direct_gain;
  CHECK(tail_e >= 0.5 * want);
  CHECK(tail_e <= 2.0 * want);

  const ctr::Rir zero_tail = ctr::simulate_rir(1.5, room, 7, 0.0);
  double zt = 0.0;
  for (std::size_t i = zero_tail.direct_delay + 1; i < zero_tail.taps.size();
       ++i)
    zt += zero_tail.taps[i] * zero_tail.taps[i];
  CHECK(zt == 0.0);
}

TEST_CASE("activity patterns") {
  const double fs = 16000.0;
  const auto full = ctr::generate_activity(ctr::ActivityPattern::FullOverlap,
                                           0.5, 2, 1, fs);
  for (const auto& row : full.sample_activity)
    for (auto v : row) CHECK(v == 1);

  const auto none = ctr::generate_activity(ctr::ActivityPattern::NoOverlap, 3.0,
                                           2, 1, fs);
  for (std::size_t i = 0; i < none.num_samples; ++i) {
    const int active = none.sample_activity[0][i] + none.sample_activity[1][i];
    CHECK(active == 1);
    const std::size_t turn = (i / 16000) % 2;
    CHECK(none.sample_activity[turn][i] == 1);
  }

  const auto mk = ctr::generate_activity(ctr::ActivityPattern::Markov, 2.0, 3,
                                         99, fs);
  CHECK(mk.sample_activity.size() == 3);
  for (const auto& row : mk.sample_activity) {
    std::size_t active = 0;
    for (auto v : row) active += v;
    CHECK(active > 0);  // guaranteed minimum activity
  }
  const auto mk2 = ctr::generate_activity(ctr::ActivityPattern::Markov, 2.0, 3,
                                          99, fs);
  CHECK(mk.sample_activity == mk2.sample_activity);
}

TEST_CASE("per-array clock offsets delay all far-field channels consistently") {
  SceneConfig base = ctrtest::small_scene(210, 1.0, 2, 1);
  SceneConfig shifted = base;
  shifted.clock_offset_frames = {3};
  const std::size_t hop = base.stft.hop_len();

  const MixtureSet a = ctr::simulate_scene(base);
  const MixtureSet b = ctr::simulate_scene(shifted);

  // close-talk side is untouched
  for (std::size_t d = 0; d < 2; ++d)
    CHECK(ctrtest::diff_energy(a.close_talk[d], b.close_talk[d]) == 0.0);

  // far mixture is the same signal delayed by offset * hop samples
  const auto ya = ctr::istft(a.far_field[0][0], base.stft, a.num_samples);
  const auto yb = ctr::istft(b.far_field[0][0], base.stft, b.num_samples);
  const std::size_t off = 3 * hop;
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = off; i < ya.size(); ++i) {
    diff += (yb[i] - ya[i - off]) * (yb[i] - ya[i - off]);
    ref += ya[i - off] * ya[i - off];
  }
  CHECK(diff <= 1e-18 * ref);

  // the physical identity still holds in the shifted scene
  const auto& gt = *b.ground_truth;
  std::vector<const Spectrogram*> parts{&gt.far_images[0][0][0],
                                        &gt.far_images[0][0][1],
                                        &gt.far_noise[0][0]};
  CHECK(identity_residual(b.far_field[0][0], parts) <= 1e-18);

  SceneConfig bad = base;
  bad.clock_offset_frames = {1, 2};  // one array configured
  CHECK_THROWS(ctr::simulate_scene(bad));
}

TEST_CASE("scene validation rejects out-of-range settings") {
  SceneConfig cfg = ctrtest::small_scene(1);
  cfg.seed_set = false;
  CHECK_THROWS(ctr::simulate_scene(cfg));

  cfg = ctrtest::small_scene(1);
  cfg.t60_s = 0.1;
  CHECK_THROWS(cfg.validate());

  cfg = ctrtest::small_scene(1);
  cfg.snr_db_max = 25.0;
  CHECK_THROWS(cfg.validate());

  cfg = ctrtest::small_scene(1);
  cfg.noise_sources = 5;
  CHECK_THROWS(cfg.validate());

  cfg = ctrtest::small_scene(1);
  cfg.close_tail_scale = -0.1;
  CHECK_THROWS(cfg.validate());
}
