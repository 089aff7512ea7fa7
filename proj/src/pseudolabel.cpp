#include "ctr/pseudolabel.hpp"

#include <cmath>

#include "ctr/losses.hpp"

namespace ctr {

FilterBank estimate_direct_rtf(const Spectrogram& far_mixture,
                               const Spectrogram& close_estimate, int delay,
                               const PseudoLabelConfig& cfg,
                               const WeightMap& lambda) {
  cfg.validate();
  const Spectrogram shifted = shift_frames(close_estimate, delay);
  return estimate_fcp_filter(far_mixture, shifted, cfg.window(), lambda);
}

int estimate_delay(const Spectrogram& far_mixture,
                   const Spectrogram& close_estimate,
                   const PseudoLabelConfig& cfg, const WeightMap& lambda,
                   double* best_residual, FilterBank* best_filter,
                   bool* at_boundary) {
  cfg.validate();
  bool silent = true;
  for (const auto& v : close_estimate.raw())
    if (v != cdouble(0, 0)) {
      silent = false;
      break;
    }
  if (silent) throw std::invalid_argument("degenerate source: all-silent estimate");
  const TapWindow window = cfg.window();
  int best_k = 0;
  double best_obj = std::numeric_limits<double>::infinity();
  FilterBank best_bank;
  // smaller |k| first, negative before positive on equal magnitude, so a
  // strict < comparison realizes the tie-break order directly
  std::vector<int> order;
  order.push_back(0);
  for (int m = 1; m <= cfg.max_delay; ++m) {
    order.push_back(-m);
    order.push_back(m);
  }
  for (int k : order) {
    const Spectrogram shifted = shift_frames(close_estimate, k);
    FilterBank bank = estimate_fcp_filter(far_mixture, shifted, window, lambda);
    const double obj =
        fcp_objective(far_mixture, shifted, bank, window, lambda);
    if (obj < best_obj) {
      best_obj = obj;
      best_k = k;
      best_bank = std::move(bank);
    }
  }
  if (best_residual) *best_residual = best_obj;
  if (best_filter) *best_filter = std::move(best_bank);
  if (at_boundary) *at_boundary = std::abs(best_k) == cfg.max_delay &&
                                  cfg.max_delay > 0;
  return best_k;
}

Spectrogram compute_pseudo_label(const Spectrogram& close_estimate,
                                 const FilterBank& filter, int delay,
                                 const PseudoLabelConfig& cfg) {
  const Spectrogram shifted = shift_frames(close_estimate, delay);
  return apply_filter(filter, shifted, cfg.window());
}

PseudoLabelResult build_pseudo_labels(
    const Spectrogram& far_mixture,
    std::span<const Spectrogram> close_estimates,
    const PseudoLabelConfig& cfg) {
  cfg.validate();
  const WeightMap lambda = compute_lambda(far_mixture, cfg.weighting);
  PseudoLabelResult res;
  for (const Spectrogram& z : close_estimates) {
    if (!z.same_shape(far_mixture))
      throw std::invalid_argument("close estimate shape mismatch");
    double residual = 0.0;
    FilterBank bank;
    bool boundary = false;
    const int k = estimate_delay(far_mixture, z, cfg, lambda, &residual, &bank,
                                 &boundary);
    res.labels.push_back(compute_pseudo_label(z, bank, k, cfg));
    res.delays.push_back(k);
    res.filters.push_back(std::move(bank));
    res.residuals.push_back(residual);
    res.at_boundary.push_back(boundary);
  }
  return res;
}

}  // namespace ctr
