#pragma once

// Pseudo-label generation for far-field training targets: a short causal
// relative-transfer filter maps each close-talk estimate onto a far-field
// mixture, with the inter-device frame delay found by enumeration.

#include <span>
#include <vector>

#include "ctr/fcp.hpp"
#include "ctr/types.hpp"

namespace ctr {

struct PseudoLabelConfig {
  int label_taps = 2;  // L, causal taps [t-L+1 .. t]
  int max_delay = 9;   // E, delays enumerated over {-E .. E}
  WeightingMode weighting{WeightVariant::QuantileFloor};

  void validate() const {
    if (label_taps < 1) throw std::invalid_argument("label_taps must be >= 1");
    if (max_delay < 0) throw std::invalid_argument("max_delay must be >= 0");
    weighting.validate();
  }

  TapWindow window() const { return TapWindow{label_taps - 1, 0, 0}; }
};

struct PseudoLabelResult {
  std::vector<Spectrogram> labels;   // one per speaker
  std::vector<int> delays;           // chosen frame delay per speaker
  std::vector<FilterBank> filters;   // fitted filters per speaker
  std::vector<double> residuals;     // weighted fit residual per speaker
  std::vector<bool> at_boundary;     // delay landed on +-max_delay
};

// Causal filter fit from the delay-shifted close-talk estimate to the
// far-field mixture, per frequency bin.
FilterBank estimate_direct_rtf(const Spectrogram& far_mixture,
                               const Spectrogram& close_estimate, int delay,
                               const PseudoLabelConfig& cfg,
                               const WeightMap& lambda);

// Enumerates delays in {-E..E}, refitting the filter at each, and returns
// the minimizer of the weighted residual. Ties prefer the smaller |delay|,
// then the negative one. Optional outputs avoid refitting at the winner.
int estimate_delay(const Spectrogram& far_mixture,
                   const Spectrogram& close_estimate,
                   const PseudoLabelConfig& cfg, const WeightMap& lambda,
                   double* best_residual = nullptr,
                   FilterBank* best_filter = nullptr,
                   bool* at_boundary = nullptr);

// Applies the fitted filter to the delay-shifted close-talk estimate.
Spectrogram compute_pseudo_label(const Spectrogram& close_estimate,
                                 const FilterBank& filter, int delay,
                                 const PseudoLabelConfig& cfg);

// Full pipeline for one far-field mic: delay search, filter fit and label
// synthesis for every speaker.
PseudoLabelResult build_pseudo_labels(
    const Spectrogram& far_mixture,
    std::span<const Spectrogram> close_estimates,
    const PseudoLabelConfig& cfg);

}  // namespace ctr
