#pragma once

// Shared domain types: spectrograms, filter banks, speaker activity,
// mixture sets and the hyper-parameter container.
//
// All types are immutable in spirit: construct, then share freely across
// threads. Mutation happens by building new values.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctr {

using cdouble = std::complex<double>;

// Complex STFT coefficient grid, T frames by F bins.
// Storage is bin-major: the time series of one frequency bin is contiguous,
// which is what every per-frequency kernel iterates over.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::size_t frames, std::size_t bins, double sample_rate_hz,
              double window_ms, double hop_ms)
      : frames_(frames),
        bins_(bins),
        sample_rate_(sample_rate_hz),
        window_ms_(window_ms),
        hop_ms_(hop_ms),
        data_(frames * bins, cdouble(0.0, 0.0)) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  double sample_rate() const { return sample_rate_; }
  double window_ms() const { return window_ms_; }
  double hop_ms() const { return hop_ms_; }

  cdouble& at(std::size_t t, std::size_t f) { return data_[f * frames_ + t]; }
  const cdouble& at(std::size_t t, std::size_t f) const {
    return data_[f * frames_ + t];
  }

  // Contiguous time series of bin f.
  std::span<cdouble> bin(std::size_t f) {
    return {data_.data() + f * frames_, frames_};
  }
  std::span<const cdouble> bin(std::size_t f) const {
    return {data_.data() + f * frames_, frames_};
  }

  std::span<cdouble> raw() { return data_; }
  std::span<const cdouble> raw() const { return data_; }

  bool same_shape(const Spectrogram& o) const {
    return frames_ == o.frames_ && bins_ == o.bins_;
  }

  bool all_finite() const;

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  double sample_rate_ = 0.0;
  double window_ms_ = 0.0;
  double hop_ms_ = 0.0;
  std::vector<cdouble> data_;
};

// Per-frequency complex filter vectors. Tap ordering matches the time window
// the filter is applied to: index 0 is the oldest tap.
struct FilterBank {
  std::size_t bins = 0;
  std::size_t taps_per_bin = 0;
  std::vector<cdouble> taps;  // bins * taps_per_bin, bin-major
  bool regularized = false;   // a ridge was needed for at least one bin

  FilterBank() = default;
  FilterBank(std::size_t bins_, std::size_t taps_)
      : bins(bins_), taps_per_bin(taps_), taps(bins_ * taps_, cdouble(0, 0)) {}

  std::span<cdouble> bin(std::size_t f) {
    return {taps.data() + f * taps_per_bin, taps_per_bin};
  }
  std::span<const cdouble> bin(std::size_t f) const {
    return {taps.data() + f * taps_per_bin, taps_per_bin};
  }
};

// Per-speaker sample-level activity plus the derived frame-level activity.
struct ActivityTimeline {
  std::size_t num_samples = 0;
  std::size_t num_speakers = 0;
  // sample_activity[c] has num_samples entries in {0,1}.
  std::vector<std::vector<std::uint8_t>> sample_activity;
  // frame_activity[c] has num_frames entries; derived, may be empty.
  std::vector<std::vector<std::uint8_t>> frame_activity;
  double window_ms = 0.0;
  double hop_ms = 0.0;

  bool has_frames() const { return !frame_activity.empty(); }
};

struct GroundTruth {
  // Close-talk speech Z(c): the wearer's own reverberant speech at their
  // close-talk mic.
  std::vector<Spectrogram> close_talk_speech;
  // Direct-path-only version of the above (the dereverbed target).
  std::vector<Spectrogram> close_talk_direct;
  // Direct-path images per far-field array: direct_path[a][mic][c].
  std::vector<std::vector<std::vector<Spectrogram>>> direct_path;
  // Full reverberant images, for physical-model identity checks:
  // close_talk_images[d][c] and far_images[a][mic][c].
  std::vector<std::vector<Spectrogram>> close_talk_images;
  std::vector<std::vector<std::vector<Spectrogram>>> far_images;
  // Noise component at each close-talk mic.
  std::vector<Spectrogram> close_talk_noise;
  // Noise component per array/mic: far_noise[a][mic].
  std::vector<std::vector<Spectrogram>> far_noise;
};

// A scene's recordings: C close-talk mixtures and a list of far-field
// arrays, each holding one spectrogram per microphone.
struct MixtureSet {
  std::vector<Spectrogram> close_talk;                 // size C
  std::vector<std::vector<Spectrogram>> far_field;     // [array][mic]
  ActivityTimeline activity;
  std::optional<GroundTruth> ground_truth;
  std::size_t num_samples = 0;

  std::size_t num_speakers() const { return close_talk.size(); }
  std::size_t num_far_mics() const {
    std::size_t n = 0;
    for (const auto& a : far_field) n += a.size();
    return n;
  }
};

// Every tunable from the hyper-parameter table, with the published defaults.
struct HyperParams {
  int taps_past = 13;        // I
  int taps_future = 1;       // J
  double xi = 0.01;          // weighting floor factor
  double beta = 1.0;         // SA-loss weight
  int pred_delay = 3;        // prediction delay for reverb modeling
  double kappa1 = 1.0;       // supervised-loss weight (close-talk model)
  int label_taps = 2;        // L, pseudo-label filter taps
  int max_delay = 9;         // E, max hypothesized frame delay
  int cte_taps = 1;          // A, taps per side in the CTE filter
  double delta_weight = 20.0;  // weight of the CTE loss
  double kappa2 = 1.0;       // supervised-loss weight (far-field model)
  double alpha = 1.0;        // magnitude compression factor
  double theta = 20.0;       // weighted-sampling factor
  double block_s = 12.0;     // W
  double block_ctx_s = 4.0;  // W_ctx
  double block_out_s = 4.0;  // W_out

  void validate() const {
    if (taps_past < 0) throw std::invalid_argument("taps_past must be >= 0");
    if (taps_future < 0) throw std::invalid_argument("taps_future must be >= 0");
    if (pred_delay <= 0 || pred_delay > taps_past)
      throw std::invalid_argument("pred_delay must satisfy 0 < delay <= taps_past");
    if (label_taps < 1) throw std::invalid_argument("label_taps must be >= 1");
    if (max_delay < 0) throw std::invalid_argument("max_delay must be >= 0");
    if (cte_taps < 0) throw std::invalid_argument("cte_taps must be >= 0");
    if (xi <= 0) throw std::invalid_argument("xi must be > 0");
    if (alpha <= 0) throw std::invalid_argument("alpha must be > 0");
    if (beta < 0) throw std::invalid_argument("beta must be >= 0");
    if (delta_weight < 0) throw std::invalid_argument("delta_weight must be >= 0");
    if (theta < 0) throw std::invalid_argument("theta must be >= 0");
  }
};

// Report-based validation: returns one human-readable line per violated
// invariant; empty means the set is well formed.
std::vector<std::string> validate(const MixtureSet& set);

}  // namespace ctr
