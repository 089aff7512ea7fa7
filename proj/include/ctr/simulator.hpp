#pragma once

// Deterministic synthetic conversational-scene generator. Provides ground
// truth (per-speaker close-talk speech, direct-path far-field images,
// per-mic noise components) for every test and for calibration.
//
// The generator is not a geometric-acoustics simulator: each RIR is a direct
// tap (1/distance gain, distance-proportional delay) plus a seeded
// exponentially decaying diffuse tail matched to the requested T60.

#include <cstdint>
#include <optional>
#include <vector>

#include "ctr/stft.hpp"
#include "ctr/types.hpp"

namespace ctr {

enum class ActivityPattern { FullOverlap, NoOverlap, Markov };

struct ArraySpec {
  std::size_t num_mics = 2;
  double radius_m = 0.05;
};

struct RoomSpec {
  double t60_s = 0.3;
  double sample_rate = 16000.0;
};

struct Rir {
  std::vector<double> taps;
  std::size_t direct_delay = 0;  // samples
  double direct_gain = 0.0;
};

struct SceneConfig {
  std::size_t num_speakers = 2;
  std::vector<ArraySpec> arrays = {{2, 0.05}};
  double t60_s = 0.3;              // [0.2, 0.7]
  double close_talk_min_m = 0.2;   // close-talk distance range
  double close_talk_max_m = 0.5;
  double level_db = 9.0;           // per-speaker level in [-level, +level]
  double snr_db_min = -20.0;       // speech-to-noise ratio range
  double snr_db_max = 20.0;
  double duration_s = 6.0;
  ActivityPattern pattern = ActivityPattern::Markov;
  double markov_switch_hz = 0.5;   // state switch rate for the Markov pattern
  std::size_t noise_sources = 1;   // <= 4; 0 for a noiseless scene
  double close_tail_scale = 0.15;  // RIR tail energy relative to direct path
  double far_tail_scale = 0.35;
  std::uint64_t seed = 0;
  bool seed_set = false;           // seed is mandatory
  StftConfig stft;
  // Optional synthetic inter-device clock offset per array, in STFT frames.
  std::vector<int> clock_offset_frames;

  void validate() const;
};

// Deterministic, fully specified uniform/normal draws (independent of
// standard-library distribution internals).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}
  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();   // standard normal, Box-Muller

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

Rir simulate_rir(double distance_m, const RoomSpec& room, std::uint64_t seed,
                 double tail_scale = 0.35);

ActivityTimeline generate_activity(ActivityPattern pattern, double duration_s,
                                   std::size_t num_speakers,
                                   std::uint64_t seed, double sample_rate,
                                   double markov_switch_hz = 0.5);

// Builds the full scene. When source_signals is provided it must hold one
// waveform of duration_s * sample_rate samples per speaker; otherwise seeded
// colored-noise bursts gated by the activity pattern are used.
MixtureSet simulate_scene(
    const SceneConfig& cfg,
    const std::optional<std::vector<std::vector<double>>>& source_signals =
        std::nullopt);

}  // namespace ctr
