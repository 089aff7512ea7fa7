#pragma once

// Forward convolutive prediction: per-frequency weighted least-squares filter
// estimation and filter application.
//
// Conventions (fixed across the project):
//   - A filter for tap window (I past, J future) has I+1+J taps ordered
//     [t-I, ..., t, ..., t+J]; tap k reads the source at frame t - I + k.
//   - Filtering computes g(f)^H z~(t,f), i.e. taps enter conjugated.
//   - With prediction delay D > 0 the window becomes [t-I, ..., t-D]
//     (I-D+1 taps) and the future count is ignored.
//   - Out-of-range frames read as zero (time-edge zero padding), so the
//     output always has the same frame count as the source.

#include <vector>

#include "ctr/types.hpp"

namespace ctr {

enum class WeightVariant {
  MaxFloor,       // floor = max over all T-F units of |ref|^2
  QuantileFloor,  // floor = percentile of per-frame maxima of |ref|^2
  Constant,       // lambda = 1 everywhere (plain least squares)
};

struct WeightingMode {
  WeightVariant variant = WeightVariant::MaxFloor;
  double xi = 0.01;
  double quantile = 90.0;  // percent, used by QuantileFloor

  void validate() const {
    if (variant != WeightVariant::Constant && xi <= 0)
      throw std::invalid_argument("xi must be > 0");
    if (quantile <= 0 || quantile > 100)
      throw std::invalid_argument("quantile must be in (0, 100]");
  }
};

struct TapWindow {
  int past = 13;       // I
  int future = 1;      // J
  int pred_delay = 0;  // D; > 0 selects taps [t-I .. t-D]

  std::size_t tap_count() const {
    if (pred_delay > 0) {
      if (pred_delay > past)
        throw std::invalid_argument("pred_delay must be <= past taps");
      return static_cast<std::size_t>(past - pred_delay + 1);
    }
    if (past < 0 || future < 0)
      throw std::invalid_argument("negative tap counts");
    return static_cast<std::size_t>(past + 1 + future);
  }

  // Frame offset read by tap k relative to the output frame t.
  int shift(std::size_t k) const { return static_cast<int>(k) - past; }
};

// Positive per-(t,f) weights, same bin-major layout as Spectrogram.
class WeightMap {
 public:
  WeightMap() = default;
  WeightMap(std::size_t frames, std::size_t bins, double value = 1.0)
      : frames_(frames), bins_(bins), data_(frames * bins, value) {}

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  double& at(std::size_t t, std::size_t f) { return data_[f * frames_ + t]; }
  double at(std::size_t t, std::size_t f) const {
    return data_[f * frames_ + t];
  }
  std::span<const double> bin(std::size_t f) const {
    return {data_.data() + f * frames_, frames_};
  }
  std::span<double> bin(std::size_t f) {
    return {data_.data() + f * frames_, frames_};
  }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  std::vector<double> data_;
};

// lambda(t,f) = xi * floor + |ref(t,f)|^2. Throws on a degenerate (all-zero)
// reference for the flooring variants.
WeightMap compute_lambda(const Spectrogram& ref, const WeightingMode& mode);

// Closed-form minimizer, per bin f, of
//   sum_t |target(t,f) - g(f)^H z~(t,f)|^2 / lambda(t,f).
// Singular normal systems fall back to a ridge (1e-10 * trace/dim) and set
// FilterBank::regularized.
FilterBank estimate_fcp_filter(const Spectrogram& target,
                               const Spectrogram& source,
                               const TapWindow& window,
                               const WeightMap& lambda);

// Joint variant: fits one filter per source so that the SUM of the filtered
// sources matches the target in the weighted least-squares sense. This is
// the exact minimizer over all filters simultaneously, unlike fitting each
// (target, source) pair independently.
std::vector<FilterBank> estimate_fcp_filters_joint(
    const Spectrogram& target, std::span<const Spectrogram* const> sources,
    const TapWindow& window, const WeightMap& lambda);

// out(t,f) = g(f)^H z~(t,f), zero-padded edges.
Spectrogram apply_filter(const FilterBank& bank, const Spectrogram& source,
                         const TapWindow& window);

// Weighted objective of the estimation problem; used by tests and the delay
// search. residual = sum_{t,f} |target - g^H z~|^2 / lambda.
double fcp_objective(const Spectrogram& target, const Spectrogram& source,
                     const FilterBank& bank, const TapWindow& window,
                     const WeightMap& lambda);

}  // namespace ctr
