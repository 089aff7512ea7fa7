#include "ctr/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ctr {

namespace {

constexpr double kSoundSpeed = 343.0;  // m/s

struct Vec3 {
  double x, y, z;
};

double dist(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// FFT convolution, result truncated to out_len samples.
std::vector<double> convolve(const std::vector<double>& x,
                             const std::vector<double>& h,
                             std::size_t out_len) {
  const std::size_t n = next_pow2(x.size() + h.size());
  std::vector<cdouble> a(n, cdouble(0, 0)), b(n, cdouble(0, 0));
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = x[i];
  for (std::size_t i = 0; i < h.size(); ++i) b[i] = h[i];
  fft_forward(a);
  fft_forward(b);
  for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
  fft_inverse(a);
  std::vector<double> out(out_len, 0.0);
  for (std::size_t i = 0; i < std::min(out_len, n); ++i) out[i] = a[i].real();
  return out;
}

std::vector<double> colored_noise(Rng& rng, std::size_t n, double pole) {
  std::vector<double> out(n);
  double state = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    state = pole * state + (1.0 - pole) * rng.normal();
    out[i] = state;
  }
  return out;
}

double energy(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

void add_scaled(std::vector<double>& dst, const std::vector<double>& src,
                double s) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += s * src[i];
}

std::vector<double> delay_samples(const std::vector<double>& x, int k) {
  std::vector<double> out(x.size(), 0.0);
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    const int j = i - k;
    if (j >= 0 && j < n) out[i] = x[j];
  }
  return out;
}

}  // namespace

std::uint64_t Rng::next_u64() {
  // splitmix64
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

void SceneConfig::validate() const {
  if (!seed_set) throw std::invalid_argument("scene seed is mandatory");
  if (num_speakers < 1) throw std::invalid_argument("need at least one speaker");
  if (t60_s < 0.2 || t60_s > 0.7)
    throw std::invalid_argument("t60 must be in [0.2, 0.7] s");
  if (close_talk_min_m < 0.2 || close_talk_max_m > 0.5 ||
      close_talk_min_m > close_talk_max_m)
    throw std::invalid_argument("close-talk distance must be within [0.2, 0.5] m");
  if (level_db < 0 || level_db > 9)
    throw std::invalid_argument("speaker level half-range must be in [0, 9] dB");
  if (snr_db_min < -20 || snr_db_max > 20 || snr_db_min > snr_db_max)
    throw std::invalid_argument("snr range must be within [-20, 20] dB");
  if (noise_sources > 4) throw std::invalid_argument("at most 4 noise sources");
  if (close_tail_scale < 0 || far_tail_scale < 0)
    throw std::invalid_argument("tail scales must be >= 0");
  if (duration_s <= 0) throw std::invalid_argument("duration must be positive");
  if (!clock_offset_frames.empty() &&
      clock_offset_frames.size() != arrays.size())
    throw std::invalid_argument("clock offsets must match array count");
}

Rir simulate_rir(double distance_m, const RoomSpec& room, std::uint64_t seed,
                 double tail_scale) {
  if (distance_m <= 0.0)
    throw std::invalid_argument("source/mic distance must be positive");
  Rir rir;
  const double fs = room.sample_rate;
  rir.direct_delay =
      static_cast<std::size_t>(std::lround(distance_m / kSoundSpeed * fs));
  rir.direct_gain = 1.0 / distance_m;
  if (room.t60_s <= 1e-6) {
    rir.taps.assign(rir.direct_delay + 1, 0.0);
    rir.taps[rir.direct_delay] = rir.direct_gain;
    return rir;
  }
  const std::size_t tail_len =
      static_cast<std::size_t>(std::ceil(1.25 * room.t60_s * fs));
  rir.taps.assign(rir.direct_delay + 1 + tail_len, 0.0);
  rir.taps[rir.direct_delay] = rir.direct_gain;
  Rng rng(seed);
  // normalize the expected tail energy to tail_scale^2 * direct_gain^2
  double env_sq = 0.0;
  std::vector<double> env(tail_len);
  for (std::size_t i = 0; i < tail_len; ++i) {
    const double t = static_cast<double>(i + 1) / fs;
    env[i] = std::pow(10.0, -3.0 * t / room.t60_s);
    env_sq += env[i] * env[i];
  }
  const double scale = tail_scale * rir.direct_gain / std::sqrt(env_sq);
  for (std::size_t i = 0; i < tail_len; ++i)
    rir.taps[rir.direct_delay + 1 + i] = scale * env[i] * rng.normal();
  return rir;
}

ActivityTimeline generate_activity(ActivityPattern pattern, double duration_s,
                                   std::size_t num_speakers,
                                   std::uint64_t seed, double sample_rate,
                                   double markov_switch_hz) {
  const std::size_t n =
      static_cast<std::size_t>(std::lround(duration_s * sample_rate));
  ActivityTimeline out;
  out.num_samples = n;
  out.num_speakers = num_speakers;
  out.sample_activity.assign(num_speakers, std::vector<std::uint8_t>(n, 0));
  switch (pattern) {
    case ActivityPattern::FullOverlap:
      for (auto& v : out.sample_activity) std::fill(v.begin(), v.end(), 1);
      break;
    case ActivityPattern::NoOverlap: {
      const std::size_t turn =
          static_cast<std::size_t>(std::lround(sample_rate));
      for (std::size_t i = 0; i < n; ++i)
        out.sample_activity[(i / turn) % num_speakers][i] = 1;
      break;
    }
    case ActivityPattern::Markov: {
      Rng rng(seed);
      const std::size_t step =
          static_cast<std::size_t>(std::lround(sample_rate / 100.0));
      const double p_switch = markov_switch_hz * 0.01;  // per 10 ms step
      for (std::size_t c = 0; c < num_speakers; ++c) {
        bool active = rng.uniform() < 0.7;
        for (std::size_t i = 0; i < n; i += step) {
          const std::uint8_t v = active ? 1 : 0;
          for (std::size_t j = i; j < std::min(i + step, n); ++j)
            out.sample_activity[c][j] = v;
          if (rng.uniform() < p_switch) active = !active;
        }
        // guarantee some activity per speaker
        bool any = false;
        for (auto v : out.sample_activity[c]) any |= (v != 0);
        if (!any) {
          const std::size_t start = static_cast<std::size_t>(
              rng.uniform() * static_cast<double>(n / 2));
          const std::size_t len = std::min<std::size_t>(
              n - start, static_cast<std::size_t>(sample_rate));
          for (std::size_t j = start; j < start + len; ++j)
            out.sample_activity[c][j] = 1;
        }
      }
      break;
    }
  }
  return out;
}

MixtureSet simulate_scene(
    const SceneConfig& cfg,
    const std::optional<std::vector<std::vector<double>>>& source_signals) {
  cfg.validate();
  const double fs = cfg.stft.sample_rate;
  const std::size_t N =
      static_cast<std::size_t>(std::lround(cfg.duration_s * fs));
  const std::size_t C = cfg.num_speakers;
  Rng rng(cfg.seed);

  // geometry: speakers and array centers in a nominal 6x5x3 room
  std::vector<Vec3> speaker_pos(C);
  for (auto& p : speaker_pos)
    p = {rng.uniform(1.0, 5.0), rng.uniform(1.0, 4.0), rng.uniform(1.2, 1.8)};
  std::vector<Vec3> close_mic_pos(C);
  for (std::size_t c = 0; c < C; ++c) {
    const double d = rng.uniform(cfg.close_talk_min_m, cfg.close_talk_max_m);
    const double az = rng.uniform(0.0, 2.0 * std::numbers::pi);
    close_mic_pos[c] = {speaker_pos[c].x + d * std::cos(az),
                        speaker_pos[c].y + d * std::sin(az), speaker_pos[c].z};
  }
  std::vector<std::vector<Vec3>> far_mic_pos(cfg.arrays.size());
  for (std::size_t a = 0; a < cfg.arrays.size(); ++a) {
    Vec3 center;
    // keep arrays at least 1.5 m from every speaker
    for (int attempt = 0; attempt < 64; ++attempt) {
      center = {rng.uniform(0.5, 5.5), rng.uniform(0.5, 4.5),
                rng.uniform(0.8, 1.2)};
      bool ok = true;
      for (const auto& sp : speaker_pos) ok &= dist(center, sp) >= 1.5;
      if (ok) break;
    }
    for (std::size_t m = 0; m < cfg.arrays[a].num_mics; ++m) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(m) /
                         static_cast<double>(cfg.arrays[a].num_mics);
      far_mic_pos[a].push_back({center.x + cfg.arrays[a].radius_m * std::cos(ang),
                                center.y + cfg.arrays[a].radius_m * std::sin(ang),
                                center.z});
    }
  }

  ActivityTimeline activity =
      generate_activity(cfg.pattern, cfg.duration_s, C, rng.next_u64(), fs,
                        cfg.markov_switch_hz);

  // source signals: provided waveforms or gated colored noise
  std::vector<std::vector<double>> sources(C);
  if (source_signals) {
    if (source_signals->size() != C)
      throw std::invalid_argument("need one source waveform per speaker");
    for (const auto& s : *source_signals)
      if (s.size() != N)
        throw std::invalid_argument("inconsistent source waveform length");
    sources = *source_signals;
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      const double pole = rng.uniform(0.6, 0.95);
      sources[c] = colored_noise(rng, N, pole);
      for (std::size_t i = 0; i < N; ++i)
        sources[c][i] *= static_cast<double>(activity.sample_activity[c][i]);
    }
  }
  // normalize active energy to unit variance, then apply sampled level
  std::vector<double> level_db(C);
  for (std::size_t c = 0; c < C; ++c) {
    double e = 0.0;
    std::size_t active = 0;
    for (std::size_t i = 0; i < N; ++i) {
      e += sources[c][i] * sources[c][i];
      active += activity.sample_activity[c][i];
    }
    level_db[c] = rng.uniform(-cfg.level_db, cfg.level_db);
    const double target = std::pow(10.0, level_db[c] / 20.0);
    const double norm =
        (e > 0.0) ? target / std::sqrt(e / std::max<std::size_t>(active, 1))
                  : 0.0;
    for (auto& v : sources[c]) v *= norm;
  }

  const RoomSpec room{cfg.t60_s, fs};
  const RoomSpec dry{0.0, fs};
  const double kCloseTail = cfg.close_tail_scale;
  const double kFarTail = cfg.far_tail_scale;

  // time-domain components
  std::vector<std::vector<std::vector<double>>> ct_img(
      C, std::vector<std::vector<double>>(C));           // [mic d][speaker c]
  std::vector<std::vector<double>> ct_direct(C);         // own direct path
  std::vector<std::vector<std::vector<std::vector<double>>>> ff_img(
      cfg.arrays.size());                                // [a][mic][c]
  std::vector<std::vector<std::vector<std::vector<double>>>> ff_direct(
      cfg.arrays.size());

  for (std::size_t d = 0; d < C; ++d)
    for (std::size_t c = 0; c < C; ++c) {
      const double dm = std::max(dist(close_mic_pos[d], speaker_pos[c]), 0.05);
      const std::uint64_t rs = cfg.seed * 1315423911ULL + d * 131 + c;
      Rir rir = simulate_rir(dm, room, rs, kCloseTail);
      ct_img[d][c] = convolve(sources[c], rir.taps, N);
      if (d == c) {
        Rir dr = simulate_rir(dm, dry, rs, 0.0);
        ct_direct[c] = convolve(sources[c], dr.taps, N);
      }
    }
  for (std::size_t a = 0; a < cfg.arrays.size(); ++a) {
    ff_img[a].resize(far_mic_pos[a].size());
    ff_direct[a].resize(far_mic_pos[a].size());
    for (std::size_t m = 0; m < far_mic_pos[a].size(); ++m) {
      ff_img[a][m].resize(C);
      ff_direct[a][m].resize(C);
      for (std::size_t c = 0; c < C; ++c) {
        const double dm = std::max(dist(far_mic_pos[a][m], speaker_pos[c]), 0.05);
        const std::uint64_t rs =
            cfg.seed * 2654435761ULL + (a * 17 + m) * 1031 + c;
        Rir rir = simulate_rir(dm, room, rs, kFarTail);
        ff_img[a][m][c] = convolve(sources[c], rir.taps, N);
        Rir dr = simulate_rir(dm, dry, rs, 0.0);
        ff_direct[a][m][c] = convolve(sources[c], dr.taps, N);
      }
    }
  }

  // noise: point sources of colored noise, scaled to the sampled SNR at the
  // first far-field mic (direct-path speech energy vs noise energy)
  std::vector<std::vector<double>> ct_noise(C, std::vector<double>(N, 0.0));
  std::vector<std::vector<std::vector<double>>> ff_noise(cfg.arrays.size());
  for (std::size_t a = 0; a < cfg.arrays.size(); ++a)
    ff_noise[a].assign(far_mic_pos[a].size(), std::vector<double>(N, 0.0));

  if (cfg.noise_sources > 0) {
    for (std::size_t k = 0; k < cfg.noise_sources; ++k) {
      const Vec3 npos{rng.uniform(0.5, 5.5), rng.uniform(0.5, 4.5),
                      rng.uniform(0.5, 2.5)};
      const double pole = rng.uniform(0.3, 0.9);
      std::vector<double> nsig = colored_noise(rng, N, pole);
      const std::uint64_t rs = cfg.seed * 40503ULL + 7919 * (k + 1);
      for (std::size_t d = 0; d < C; ++d) {
        const double dm = std::max(dist(close_mic_pos[d], npos), 0.05);
        Rir rir = simulate_rir(dm, room, rs + d, kFarTail);
        add_scaled(ct_noise[d], convolve(nsig, rir.taps, N), 1.0);
      }
      for (std::size_t a = 0; a < cfg.arrays.size(); ++a)
        for (std::size_t m = 0; m < far_mic_pos[a].size(); ++m) {
          const double dm = std::max(dist(far_mic_pos[a][m], npos), 0.05);
          Rir rir = simulate_rir(dm, room, rs + 100 + a * 17 + m, kFarTail);
          add_scaled(ff_noise[a][m], convolve(nsig, rir.taps, N), 1.0);
        }
    }
    double speech_e = 0.0;
    double noise_e = 0.0;
    if (!cfg.arrays.empty() && !ff_direct[0].empty()) {
      for (std::size_t c = 0; c < C; ++c) speech_e += energy(ff_direct[0][0][c]);
      noise_e = energy(ff_noise[0][0]);
    } else {
      for (std::size_t c = 0; c < C; ++c) speech_e += energy(ct_direct[c]);
      for (std::size_t d = 0; d < C; ++d) noise_e += energy(ct_noise[d]);
    }
    const double snr_db = rng.uniform(cfg.snr_db_min, cfg.snr_db_max);
    const double scale =
        (noise_e > 0.0)
            ? std::sqrt(speech_e / (noise_e * std::pow(10.0, snr_db / 10.0)))
            : 0.0;
    for (auto& v : ct_noise)
      for (auto& x : v) x *= scale;
    for (auto& arr : ff_noise)
      for (auto& v : arr)
        for (auto& x : v) x *= scale;
  }

  // assemble mixtures, apply per-array clock offsets, transform everything
  MixtureSet set;
  set.num_samples = N;
  set.activity = std::move(activity);
  set.activity.window_ms = cfg.stft.window_ms;
  set.activity.hop_ms = cfg.stft.hop_ms;

  GroundTruth gt;
  const auto spec = [&](const std::vector<double>& x) {
    return stft(x, cfg.stft);
  };

  gt.close_talk_images.resize(C);
  for (std::size_t d = 0; d < C; ++d) {
    std::vector<double> mix = ct_noise[d];
    for (std::size_t c = 0; c < C; ++c) {
      add_scaled(mix, ct_img[d][c], 1.0);
      gt.close_talk_images[d].push_back(spec(ct_img[d][c]));
    }
    set.close_talk.push_back(spec(mix));
    gt.close_talk_noise.push_back(spec(ct_noise[d]));
  }
  for (std::size_t c = 0; c < C; ++c) {
    gt.close_talk_speech.push_back(spec(ct_img[c][c]));
    gt.close_talk_direct.push_back(spec(ct_direct[c]));
  }

  const std::size_t hop = cfg.stft.hop_len();
  gt.direct_path.resize(cfg.arrays.size());
  gt.far_images.resize(cfg.arrays.size());
  gt.far_noise.resize(cfg.arrays.size());
  set.far_field.resize(cfg.arrays.size());
  for (std::size_t a = 0; a < cfg.arrays.size(); ++a) {
    const int off = cfg.clock_offset_frames.empty()
                        ? 0
                        : cfg.clock_offset_frames[a] * static_cast<int>(hop);
    for (std::size_t m = 0; m < ff_img[a].size(); ++m) {
      std::vector<double> mix = ff_noise[a][m];
      std::vector<Spectrogram> imgs, dirs;
      for (std::size_t c = 0; c < C; ++c) {
        add_scaled(mix, ff_img[a][m][c], 1.0);
        imgs.push_back(spec(delay_samples(ff_img[a][m][c], off)));
        dirs.push_back(spec(delay_samples(ff_direct[a][m][c], off)));
      }
      set.far_field[a].push_back(spec(delay_samples(mix, off)));
      gt.far_noise[a].push_back(spec(delay_samples(ff_noise[a][m], off)));
      gt.far_images[a].push_back(std::move(imgs));
      gt.direct_path[a].push_back(std::move(dirs));
    }
  }
  set.ground_truth = std::move(gt);
  return set;
}

}  // namespace ctr
