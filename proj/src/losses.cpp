#include "ctr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ctr/kernels.hpp"

namespace ctr {

namespace {

double mag_alpha(const cdouble& v, double alpha) {
  const double m = std::abs(v);
  if (m == 0.0) return 0.0;
  if (alpha == 1.0) return m;
  if (alpha == 2.0) return m * m;
  return std::pow(m, alpha);
}

double sum_mag_alpha(const Spectrogram& s, double alpha) {
  if (alpha == 2.0)
    return kernels::active().sum_mag_sq(s.raw().data(), s.raw().size());
  double acc = 0.0;
  for (const auto& v : s.raw()) acc += mag_alpha(v, alpha);
  return acc;
}

void add_into(Spectrogram& dst, const Spectrogram& src) {
  auto d = dst.raw();
  auto s = src.raw();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void sub_into(Spectrogram& dst, const Spectrogram& src) {
  auto d = dst.raw();
  auto s = src.raw();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s[i];
}

// |y|^a, |y|^a cos(angle y), |y|^a sin(angle y) as one triple
struct Compressed {
  double mag, re, im;
};

Compressed compress(const cdouble& v, double alpha) {
  const double m = std::abs(v);
  if (m == 0.0) return {0.0, 0.0, 0.0};
  const double ma = (alpha == 1.0) ? m : std::pow(m, alpha);
  return {ma, ma * v.real() / m, ma * v.imag() / m};
}

WeightingMode effective_weighting(const LossOptions& opts,
                                  const HyperParams& hp) {
  WeightingMode w = opts.weighting;
  w.xi = hp.xi;
  return w;
}

const Spectrogram& far_mic(const MixtureSet& mix, std::size_t p) {
  std::size_t i = p;
  for (const auto& arr : mix.far_field) {
    if (i < arr.size()) return arr[i];
    i -= arr.size();
  }
  throw std::out_of_range("far-field mic index out of range");
}

void check_estimates(const MixtureSet& mix,
                     std::span<const Spectrogram> estimates,
                     const LossOptions& opts) {
  const std::size_t want = mix.num_speakers() + (opts.noise ? 1 : 0);
  if (estimates.size() != want)
    throw std::invalid_argument("estimate count mismatch");
  for (const auto& e : estimates)
    if (!e.same_shape(mix.close_talk.front()))
      throw std::invalid_argument("estimate shape mismatch");
}

// Reconstruction at close-talk mic d from the given estimates.
Spectrogram reconstruct_close_talk(std::size_t d, const MixtureSet& mixtures,
                                   std::span<const Spectrogram> estimates,
                                   const HyperParams& hp,
                                   const LossOptions& opts) {
  const Spectrogram& y = mixtures.close_talk[d];
  const WeightMap lambda = compute_lambda(y, effective_weighting(opts, hp));
  const TapWindow cross{hp.taps_past, hp.taps_future, 0};

  Spectrogram recon = estimates[d];
  for (std::size_t c = 0; c < estimates.size(); ++c) {
    if (c == d) continue;
    FilterBank g = estimate_fcp_filter(y, estimates[c], cross, lambda);
    add_into(recon, apply_filter(g, estimates[c], cross));
  }
  if (opts.dereverb) {
    // Fit the self term with prediction delay against the leftover residual
    // so the added term refines the reconstruction rather than re-predicting
    // the whole mixture.
    const TapWindow self{hp.taps_past, 0, hp.pred_delay};
    Spectrogram residual = y;
    sub_into(residual, recon);
    FilterBank h = estimate_fcp_filter(residual, estimates[d], self, lambda);
    add_into(recon, apply_filter(h, estimates[d], self));
  }
  return recon;
}

}  // namespace

double LossBreakdown::mc_sum() const {
  double acc = 0.0;
  for (double v : mc_close_talk) acc += v;
  for (double v : mc_far_field) acc += v;
  return acc;
}

double g_loss(const Spectrogram& ref, const Spectrogram& est, double alpha) {
  if (alpha <= 0) throw std::invalid_argument("alpha must be > 0");
  if (!ref.same_shape(est)) throw std::invalid_argument("shape mismatch");
  auto r = ref.raw();
  auto e = est.raw();
  double acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const Compressed a = compress(r[i], alpha);
    const Compressed b = compress(e[i], alpha);
    acc += std::abs(a.mag - b.mag) + std::abs(a.re - b.re) +
           std::abs(a.im - b.im);
  }
  return acc;
}

double f_loss(const Spectrogram& ref, const Spectrogram& est, double alpha) {
  const double denom = sum_mag_alpha(ref, alpha);
  if (denom <= 0.0)
    throw std::invalid_argument("degenerate normalization: all-zero reference");
  return g_loss(ref, est, alpha) / denom;
}

double mc_loss_close_talk(std::size_t d, const MixtureSet& mixtures,
                          std::span<const Spectrogram> estimates,
                          const HyperParams& hp, const LossOptions& opts) {
  if (d >= mixtures.num_speakers())
    throw std::out_of_range("close-talk mic index out of range");
  check_estimates(mixtures, estimates, opts);
  Spectrogram recon =
      reconstruct_close_talk(d, mixtures, estimates, hp, opts);
  return f_loss(mixtures.close_talk[d], recon, hp.alpha);
}

double mc_loss_far_field(std::size_t p, const MixtureSet& mixtures,
                         std::span<const Spectrogram> estimates,
                         const HyperParams& hp, const LossOptions& opts) {
  check_estimates(mixtures, estimates, opts);
  const Spectrogram& y = far_mic(mixtures, p);
  const WeightMap lambda = compute_lambda(y, effective_weighting(opts, hp));
  const TapWindow cross{hp.taps_past, hp.taps_future, 0};
  Spectrogram recon(y.frames(), y.bins(), y.sample_rate(), y.window_ms(),
                    y.hop_ms());
  for (std::size_t c = 0; c < estimates.size(); ++c) {
    FilterBank g = estimate_fcp_filter(y, estimates[c], cross, lambda);
    add_into(recon, apply_filter(g, estimates[c], cross));
  }
  return f_loss(y, recon, hp.alpha);
}

LossBreakdown mc_loss_total(const MixtureSet& mixtures,
                            std::span<const Spectrogram> estimates,
                            const HyperParams& hp, const LossOptions& opts) {
  LossBreakdown out;
  for (std::size_t d = 0; d < mixtures.num_speakers(); ++d)
    out.mc_close_talk.push_back(
        mc_loss_close_talk(d, mixtures, estimates, hp, opts));
  for (std::size_t p = 0; p < mixtures.num_far_mics(); ++p)
    out.mc_far_field.push_back(
        mc_loss_far_field(p, mixtures, estimates, hp, opts));
  out.total = out.mc_sum();
  return out;
}

double sa_loss(std::span<const Spectrogram> estimates,
               const ActivityTimeline& activity,
               std::span<const Spectrogram> close_talk_mixtures, double alpha) {
  if (!activity.has_frames())
    throw std::invalid_argument("activity has no derived frame matrix");
  if (estimates.size() > activity.frame_activity.size() ||
      estimates.size() != close_talk_mixtures.size())
    throw std::invalid_argument("speaker count mismatch");
  double acc = 0.0;
  for (std::size_t c = 0; c < estimates.size(); ++c) {
    const Spectrogram& z = estimates[c];
    const auto& dmask = activity.frame_activity[c];
    if (dmask.size() != z.frames())
      throw std::invalid_argument("frame activity length mismatch");
    double num = 0.0;
    for (std::size_t f = 0; f < z.bins(); ++f) {
      auto zb = z.bin(f);
      for (std::size_t t = 0; t < z.frames(); ++t)
        if (!dmask[t]) num += mag_alpha(zb[t], alpha);
    }
    const double denom = sum_mag_alpha(close_talk_mixtures[c], alpha);
    if (denom <= 0.0)
      throw std::invalid_argument("degenerate normalization: all-zero mixture");
    acc += num / denom;
  }
  return acc;
}

Spectrogram frame_mute(const Spectrogram& estimate,
                       std::span<const std::uint8_t> frame_activity) {
  if (frame_activity.size() != estimate.frames())
    throw std::invalid_argument("frame activity length mismatch");
  Spectrogram out = estimate;
  for (std::size_t f = 0; f < out.bins(); ++f) {
    auto b = out.bin(f);
    for (std::size_t t = 0; t < out.frames(); ++t)
      if (!frame_activity[t]) b[t] = cdouble(0.0, 0.0);
  }
  return out;
}

LossBreakdown weakly_supervised_loss(const MixtureSet& mixtures,
                                     std::span<const Spectrogram> estimates,
                                     const ActivityTimeline& activity,
                                     const HyperParams& hp,
                                     const LossOptions& opts) {
  check_estimates(mixtures, estimates, opts);
  if (!activity.has_frames())
    throw std::invalid_argument("activity has no derived frame matrix");
  const std::size_t C = mixtures.num_speakers();

  std::vector<Spectrogram> muted;
  muted.reserve(estimates.size());
  for (std::size_t c = 0; c < C; ++c)
    muted.push_back(frame_mute(estimates[c], activity.frame_activity[c]));
  if (opts.noise) muted.push_back(estimates[C]);  // noise is always active

  LossBreakdown out = mc_loss_total(mixtures, muted, hp, opts);
  out.sa = sa_loss(estimates.subspan(0, C), activity, mixtures.close_talk,
                   hp.alpha);
  out.total = out.mc_sum() + hp.beta * out.sa;
  return out;
}

double supervised_speech_loss(std::span<const Spectrogram> estimates,
                              std::span<const Spectrogram> targets,
                              std::span<const Spectrogram> close_talk_mixtures,
                              double alpha) {
  if (estimates.size() != targets.size() ||
      estimates.size() != close_talk_mixtures.size())
    throw std::invalid_argument("speaker count mismatch");
  double acc = 0.0;
  for (std::size_t c = 0; c < estimates.size(); ++c) {
    const double denom = sum_mag_alpha(close_talk_mixtures[c], alpha);
    if (denom <= 0.0)
      throw std::invalid_argument("degenerate normalization: all-zero mixture");
    acc += g_loss(estimates[c], targets[c], alpha) / denom;
  }
  return acc;
}

double supervised_noise_loss(std::span<const Spectrogram> noise_estimates,
                             std::span<const Spectrogram> noises,
                             std::span<const Spectrogram> close_talk_mixtures,
                             double alpha) {
  return supervised_speech_loss(noise_estimates, noises, close_talk_mixtures,
                                alpha);
}

Spectrogram aggregate_noise(std::span<const Spectrogram> noise_estimates,
                            const NoiseAggregation& mode) {
  if (noise_estimates.empty())
    throw std::invalid_argument("no noise estimates");
  if (mode.variant == NoiseAggregation::Variant::RandomChoice) {
    std::mt19937_64 rng(mode.rng_seed);
    std::uniform_int_distribution<std::size_t> pick(0,
                                                    noise_estimates.size() - 1);
    return noise_estimates[pick(rng)];
  }
  Spectrogram out = noise_estimates[0];
  for (std::size_t i = 1; i < noise_estimates.size(); ++i)
    add_into(out, noise_estimates[i]);
  const double inv = 1.0 / static_cast<double>(noise_estimates.size());
  for (auto& v : out.raw()) v *= inv;
  return out;
}

LossBreakdown ctrnet_loss(const MixtureSet& mixtures,
                          std::span<const Spectrogram> estimates,
                          MixtureKind kind, const HyperParams& hp,
                          const LossOptions& opts) {
  if (kind == MixtureKind::Real)
    return weakly_supervised_loss(mixtures, estimates, mixtures.activity, hp,
                                  opts);

  check_estimates(mixtures, estimates, opts);
  if (!mixtures.ground_truth)
    throw std::invalid_argument("simulated loss requires ground truth");
  const auto& gt = *mixtures.ground_truth;
  const std::size_t C = mixtures.num_speakers();
  const auto& targets =
      (opts.dereverb && !gt.close_talk_direct.empty()) ? gt.close_talk_direct
                                                       : gt.close_talk_speech;

  LossBreakdown out;
  out.supervised_speech = supervised_speech_loss(
      estimates.subspan(0, C), targets, mixtures.close_talk, hp.alpha);
  if (opts.noise && !gt.close_talk_noise.empty()) {
    // One aggregated noise channel is scored against each mic's noise and
    // averaged over mics.
    double acc = 0.0;
    for (std::size_t d = 0; d < C; ++d) {
      const double denom = sum_mag_alpha(mixtures.close_talk[d], hp.alpha);
      acc += g_loss(estimates[C], gt.close_talk_noise[d], hp.alpha) / denom;
    }
    out.supervised_noise = acc / static_cast<double>(C);
  }
  out.total = hp.kappa1 * (out.supervised_speech + out.supervised_noise);
  return out;
}

double pl_loss(std::span<const Spectrogram> far_estimates,
               std::span<const Spectrogram> pseudo_labels,
               const Spectrogram& far_mixture, double alpha) {
  if (far_estimates.size() != pseudo_labels.size())
    throw std::invalid_argument("speaker count mismatch");
  const double denom = sum_mag_alpha(far_mixture, alpha);
  if (denom <= 0.0)
    throw std::invalid_argument("degenerate normalization: all-zero mixture");
  double acc = 0.0;
  for (std::size_t c = 0; c < far_estimates.size(); ++c)
    acc += g_loss(far_estimates[c], pseudo_labels[c], alpha) / denom;
  return acc;
}

Spectrogram shift_frames(const Spectrogram& spec, int k) {
  Spectrogram out(spec.frames(), spec.bins(), spec.sample_rate(),
                  spec.window_ms(), spec.hop_ms());
  const int T = static_cast<int>(spec.frames());
  for (std::size_t f = 0; f < spec.bins(); ++f) {
    auto src = spec.bin(f);
    auto dst = out.bin(f);
    for (int t = 0; t < T; ++t) {
      const int s = t + k;
      if (s >= 0 && s < T) dst[static_cast<std::size_t>(t)] = src[s];
    }
  }
  return out;
}

double cte_loss(std::span<const Spectrogram> far_estimates,
                std::span<const Spectrogram> close_estimates,
                std::span<const int> delays, const HyperParams& hp,
                std::span<const Spectrogram> close_talk_mixtures) {
  if (far_estimates.size() != close_estimates.size() ||
      far_estimates.size() != delays.size() ||
      far_estimates.size() != close_talk_mixtures.size())
    throw std::invalid_argument("speaker count mismatch");
  const TapWindow window{hp.cte_taps, hp.cte_taps, 0};
  double acc = 0.0;
  for (std::size_t c = 0; c < far_estimates.size(); ++c) {
    const Spectrogram& z = close_estimates[c];
    const Spectrogram target = shift_frames(z, delays[c]);
    // weighting from the close-talk estimate, evaluated at the shifted frames
    const std::size_t T = z.frames();
    std::vector<double> power(T * z.bins());
    kernels::active().mag_sq(z.raw().data(), power.data(), power.size());
    const double floor = *std::max_element(power.begin(), power.end());
    if (floor <= 0.0)
      throw std::invalid_argument("degenerate close-talk estimate");
    WeightMap eta(T, z.bins());
    for (std::size_t f = 0; f < z.bins(); ++f) {
      auto tb = target.bin(f);
      auto wb = eta.bin(f);
      for (std::size_t t = 0; t < T; ++t)
        wb[t] = hp.xi * floor + std::norm(tb[t]);
    }
    FilterBank o = estimate_fcp_filter(target, far_estimates[c], window, eta);
    const Spectrogram fit = apply_filter(o, far_estimates[c], window);
    const double denom = sum_mag_alpha(close_talk_mixtures[c], hp.alpha);
    if (denom <= 0.0)
      throw std::invalid_argument("degenerate normalization: all-zero mixture");
    acc += g_loss(target, fit, hp.alpha) / denom;
  }
  return acc;
}

LossBreakdown pulss_loss(std::span<const Spectrogram> far_estimates,
                         std::span<const Spectrogram> pseudo_labels,
                         std::span<const Spectrogram> close_estimates,
                         std::span<const int> delays,
                         const Spectrogram& far_mixture,
                         std::span<const Spectrogram> direct_path_targets,
                         std::span<const Spectrogram> close_talk_mixtures,
                         MixtureKind kind, const HyperParams& hp) {
  LossBreakdown out;
  if (kind == MixtureKind::Simulated) {
    const double denom = sum_mag_alpha(far_mixture, hp.alpha);
    if (denom <= 0.0)
      throw std::invalid_argument("degenerate normalization: all-zero mixture");
    double acc = 0.0;
    for (std::size_t c = 0; c < far_estimates.size(); ++c)
      acc += g_loss(far_estimates[c], direct_path_targets[c], hp.alpha) / denom;
    out.supervised_speech = acc;
    out.total = hp.kappa2 * acc;
    return out;
  }
  out.pl = pl_loss(far_estimates, pseudo_labels, far_mixture, hp.alpha);
  out.cte =
      cte_loss(far_estimates, close_estimates, delays, hp, close_talk_mixtures);
  out.total = out.pl + hp.delta_weight * out.cte;
  return out;
}

}  // namespace ctr
