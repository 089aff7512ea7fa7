#pragma once

// Classical alternating-minimization solver for the joint filter/source
// least-squares objective: the reference non-neural estimator behind the
// pluggable estimator interface.
//
// Alternation:
//   (a) filter update - with sources fixed, every microphone's filters are
//       re-fit jointly in closed form (exact minimization per mic with
//       constant weighting);
//   (b) source update - with filters fixed, the coupled per-frequency linear
//       least-squares problem in all speaker signals is solved by
//       warm-started conjugate gradients on the normal equations.
// Both steps are non-increasing in the objective, so the trace is monotone
// up to inner-solve tolerance.

#include <functional>
#include <span>

#include "ctr/fcp.hpp"
#include "ctr/types.hpp"

namespace ctr {

enum class SolverInit { CloseTalkMixture, Zero, ProvidedEstimates };

struct SolverConfig {
  int max_outer_iters = 20;
  double cg_tol = 1e-8;  // relative residual on the normal equations
  int cg_max_iters = 200;
  SolverInit init = SolverInit::CloseTalkMixture;
  double convergence_rel = 1e-6;  // relative objective decrease
  HyperParams hp;
  // Constant weighting makes the filter step an exact minimizer of the
  // unweighted objective; flooring variants optimize the weighted surrogate.
  WeightingMode weighting{WeightVariant::Constant};

  void validate() const {
    if (max_outer_iters < 1) throw std::invalid_argument("max_outer_iters >= 1");
    if (cg_tol <= 0 || convergence_rel <= 0)
      throw std::invalid_argument("tolerances must be positive");
  }
};

struct SolveResult {
  std::vector<Spectrogram> estimates;               // one per speaker
  std::vector<std::vector<FilterBank>> close_filters;  // [d][c], empty at c==d
  std::vector<std::vector<FilterBank>> far_filters;    // [flat p][c]
  std::vector<double> objective_trace;  // objective after each outer iteration
  bool converged = false;
};

// Value of the blind-deconvolution objective for given sources and filters.
double deconvolution_objective(
    const MixtureSet& mixtures, std::span<const Spectrogram> estimates,
    const std::vector<std::vector<FilterBank>>& close_filters,
    const std::vector<std::vector<FilterBank>>& far_filters,
    const TapWindow& window);

// Convenience: objective with filters freshly fit to the given estimates.
double deconvolution_objective(const MixtureSet& mixtures,
                               std::span<const Spectrogram> estimates,
                               const SolverConfig& cfg);

SolveResult solve_blind_deconvolution(
    const MixtureSet& mixtures, const SolverConfig& cfg,
    const ActivityTimeline* activity = nullptr,
    std::span<const Spectrogram> provided_estimates = {});

// Test hook: one source update with the given filters held fixed.
std::vector<Spectrogram> source_update_fixed_filters(
    const MixtureSet& mixtures, std::span<const Spectrogram> initial,
    const std::vector<std::vector<FilterBank>>& close_filters,
    const std::vector<std::vector<FilterBank>>& far_filters,
    const TapWindow& window, double cg_tol, int cg_max_iters);

// The seam where any estimator (neural or classical) plugs in: a function
// from a mixture set to per-speaker estimates.
using Estimator = std::function<std::vector<Spectrogram>(const MixtureSet&)>;

std::vector<Spectrogram> evaluate_estimator(const Estimator& estimator,
                                            const MixtureSet& mixtures,
                                            std::size_t expected_count);

Estimator make_solver_estimator(const SolverConfig& cfg);

}  // namespace ctr
