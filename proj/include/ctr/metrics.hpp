#pragma once

// Signal-level evaluation against known references. Values are capped at
// +-150 dB so reports always serialize to finite numbers.

#include <span>
#include <string>
#include <vector>

#include "ctr/losses.hpp"
#include "ctr/types.hpp"

namespace ctr {

inline constexpr double kMetricCapDb = 150.0;

// Scale-invariant SDR: the estimate is compared against its projection onto
// the reference.
double si_sdr(std::span<const double> reference, std::span<const double> estimate);

// Plain SNR of the estimate error; not scale invariant.
double snr(std::span<const double> reference, std::span<const double> estimate);

struct McResidualReport {
  std::vector<double> close_talk;  // per close-talk mic
  std::vector<double> far_field;   // per far-field mic, arrays flattened
  double total = 0.0;

  std::string to_csv() const;
  std::string to_json() const;
};

McResidualReport mc_residual_report(const MixtureSet& mixtures,
                                    std::span<const Spectrogram> estimates,
                                    const HyperParams& hp,
                                    const LossOptions& opts);

}  // namespace ctr
