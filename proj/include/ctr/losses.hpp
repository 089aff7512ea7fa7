#pragma once

// The full scalar objective family: mixture-constraint losses, the
// speaker-activity loss, supervised losses, noise aggregation, pseudo-label
// and close-talk-estimate losses, plus the training dispatches.
//
// All losses are pure functions over immutable inputs. Filters needed inside
// the mixture-constraint losses are re-fit on every call.

#include <cstdint>
#include <span>
#include <vector>

#include "ctr/fcp.hpp"
#include "ctr/types.hpp"

namespace ctr {

struct LossOptions {
  bool noise = false;     // estimates carry a trailing noise channel
  bool dereverb = false;  // add the close-talk self term with prediction delay
  WeightingMode weighting;
};

enum class MixtureKind { Simulated, Real };

struct NoiseAggregation {
  enum class Variant { Average, RandomChoice };
  Variant variant = Variant::Average;
  std::uint64_t rng_seed = 0;
};

struct LossBreakdown {
  std::vector<double> mc_close_talk;  // one per close-talk mic
  std::vector<double> mc_far_field;   // one per far-field mic, arrays flattened
  double sa = 0.0;
  double supervised_speech = 0.0;
  double supervised_noise = 0.0;
  double pl = 0.0;
  double cte = 0.0;
  double total = 0.0;

  double mc_sum() const;
};

// Absolute loss on compressed magnitude plus compressed real/imag parts,
// summed over all T-F units.
double g_loss(const Spectrogram& ref, const Spectrogram& est, double alpha);

// g_loss normalized by the compressed energy of the reference.
double f_loss(const Spectrogram& ref, const Spectrogram& est, double alpha);

// Mixture-constraint loss at close-talk mic d. estimates holds C speaker
// estimates plus, when opts.noise, a trailing noise channel.
double mc_loss_close_talk(std::size_t d, const MixtureSet& mixtures,
                          std::span<const Spectrogram> estimates,
                          const HyperParams& hp, const LossOptions& opts);

// Mixture-constraint loss at the p-th far-field mic (arrays flattened).
double mc_loss_far_field(std::size_t p, const MixtureSet& mixtures,
                         std::span<const Spectrogram> estimates,
                         const HyperParams& hp, const LossOptions& opts);

LossBreakdown mc_loss_total(const MixtureSet& mixtures,
                            std::span<const Spectrogram> estimates,
                            const HyperParams& hp, const LossOptions& opts);

// Penalizes estimate energy outside annotated speaker activity.
double sa_loss(std::span<const Spectrogram> estimates,
               const ActivityTimeline& activity,
               std::span<const Spectrogram> close_talk_mixtures, double alpha);

// Frame muting applied to speaker estimates, then MC + beta * SA. The noise
// channel, when present, is never muted.
LossBreakdown weakly_supervised_loss(const MixtureSet& mixtures,
                                     std::span<const Spectrogram> estimates,
                                     const ActivityTimeline& activity,
                                     const HyperParams& hp,
                                     const LossOptions& opts);

double supervised_speech_loss(std::span<const Spectrogram> estimates,
                              std::span<const Spectrogram> targets,
                              std::span<const Spectrogram> close_talk_mixtures,
                              double alpha);

double supervised_noise_loss(std::span<const Spectrogram> noise_estimates,
                             std::span<const Spectrogram> noises,
                             std::span<const Spectrogram> close_talk_mixtures,
                             double alpha);

Spectrogram aggregate_noise(std::span<const Spectrogram> noise_estimates,
                            const NoiseAggregation& mode);

// Training dispatch: supervised on simulated input, weakly supervised on
// real input.
LossBreakdown ctrnet_loss(const MixtureSet& mixtures,
                          std::span<const Spectrogram> estimates,
                          MixtureKind kind, const HyperParams& hp,
                          const LossOptions& opts);

// Pseudo-label loss for far-field estimates.
double pl_loss(std::span<const Spectrogram> far_estimates,
               std::span<const Spectrogram> pseudo_labels,
               const Spectrogram& far_mixture, double alpha);

// Close-talk-estimate loss: fit a short centered filter from each far-field
// estimate to the delay-aligned close-talk estimate and penalize the fit
// residual. delays holds one frame offset per speaker.
double cte_loss(std::span<const Spectrogram> far_estimates,
                std::span<const Spectrogram> close_estimates,
                std::span<const int> delays, const HyperParams& hp,
                std::span<const Spectrogram> close_talk_mixtures);

// Far-field training dispatch: PL + delta * CTE on real input, supervised
// direct-path loss on simulated input.
LossBreakdown pulss_loss(std::span<const Spectrogram> far_estimates,
                         std::span<const Spectrogram> pseudo_labels,
                         std::span<const Spectrogram> close_estimates,
                         std::span<const int> delays,
                         const Spectrogram& far_mixture,
                         std::span<const Spectrogram> direct_path_targets,
                         std::span<const Spectrogram> close_talk_mixtures,
                         MixtureKind kind, const HyperParams& hp);

// Frame muting: zero estimate frames with no annotated activity.
Spectrogram frame_mute(const Spectrogram& estimate,
                       std::span<const std::uint8_t> frame_activity);

// spec'(t) = spec(t + k), zero-padded at the edges.
Spectrogram shift_frames(const Spectrogram& spec, int k);

}  // namespace ctr
