#include "ctr/solver.hpp"

#include <cmath>
#include <stdexcept>

#include "ctr/kernels.hpp"
#include "ctr/losses.hpp"
#include "ctr/pipeline.hpp"

namespace ctr {

namespace {

// out[t] += sum_k conj(g[k]) * z[t + shift(k)], zero-padded edges
void apply_taps_bin(std::span<const cdouble> g, const TapWindow& window,
                    std::span<const cdouble> z, std::span<cdouble> out) {
  const int T = static_cast<int>(out.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int s = window.shift(k);
    if (std::abs(s) >= T) continue;
    const std::size_t len = static_cast<std::size_t>(T - std::abs(s));
    kernels::active().caxpy(std::conj(g[k]),
                            z.data() + std::max(s, 0),
                            out.data() + std::max(-s, 0), len);
  }
}

// adjoint of the above: out[u] += sum_k g[k] * r[u - shift(k)]
void adjoint_taps_bin(std::span<const cdouble> g, const TapWindow& window,
                      std::span<const cdouble> r, std::span<cdouble> out) {
  const int T = static_cast<int>(out.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const int s = window.shift(k);
    if (std::abs(s) >= T) continue;
    const std::size_t len = static_cast<std::size_t>(T - std::abs(s));
    kernels::active().caxpy(g[k], r.data() + std::max(-s, 0),
                            out.data() + std::max(s, 0), len);
  }
}

cdouble dot_conj(std::span<const cdouble> a, std::span<const cdouble> b) {
  return kernels::active().cdot_conj(a.data(), b.data(), a.size());
}

double norm_sq(std::span<const cdouble> a) {
  return kernels::active().sum_mag_sq(a.data(), a.size());
}

// One frequency bin of the coupled source problem.
struct BinProblem {
  std::size_t T = 0;
  std::size_t C = 0;
  const TapWindow* window = nullptr;
  // filter taps per (mic, speaker); empty span means no term, identity
  // handled separately for close-talk mics
  std::vector<std::vector<std::span<const cdouble>>> close_taps;  // [d][c]
  std::vector<std::vector<std::span<const cdouble>>> far_taps;    // [p][c]
  std::vector<std::span<const cdouble>> close_y;  // [d]
  std::vector<std::span<const cdouble>> far_y;    // [p]

  std::span<const cdouble> speaker(std::span<const cdouble> x,
                                   std::size_t c) const {
    return x.subspan(c * T, T);
  }
  std::span<cdouble> speaker(std::span<cdouble> x, std::size_t c) const {
    return x.subspan(c * T, T);
  }

  // u = A x; u is stacked [close mics..., far mics...]
  void forward(std::span<const cdouble> x, std::span<cdouble> u) const {
    std::fill(u.begin(), u.end(), cdouble(0, 0));
    for (std::size_t d = 0; d < close_y.size(); ++d) {
      auto out = u.subspan(d * T, T);
      auto own = speaker(x, d);
      std::copy(own.begin(), own.end(), out.begin());
      for (std::size_t c = 0; c < C; ++c) {
        if (c == d) continue;
        apply_taps_bin(close_taps[d][c], *window, speaker(x, c), out);
      }
    }
    const std::size_t off = close_y.size() * T;
    for (std::size_t p = 0; p < far_y.size(); ++p) {
      auto out = u.subspan(off + p * T, T);
      for (std::size_t c = 0; c < C; ++c)
        apply_taps_bin(far_taps[p][c], *window, speaker(x, c), out);
    }
  }

  // v = A^H u
  void adjoint(std::span<const cdouble> u, std::span<cdouble> v) const {
    std::fill(v.begin(), v.end(), cdouble(0, 0));
    for (std::size_t d = 0; d < close_y.size(); ++d) {
      auto res = u.subspan(d * T, T);
      auto own = speaker(v, d);
      for (std::size_t t = 0; t < T; ++t) own[t] += res[t];
      for (std::size_t c = 0; c < C; ++c) {
        if (c == d) continue;
        adjoint_taps_bin(close_taps[d][c], *window, res, speaker(v, c));
      }
    }
    const std::size_t off = close_y.size() * T;
    for (std::size_t p = 0; p < far_y.size(); ++p) {
      auto res = u.subspan(off + p * T, T);
      for (std::size_t c = 0; c < C; ++c)
        adjoint_taps_bin(far_taps[p][c], *window, res, speaker(v, c));
    }
  }

  std::size_t num_mics() const { return close_y.size() + far_y.size(); }

  double objective(std::span<const cdouble> x,
                   std::span<cdouble> scratch) const {
    forward(x, scratch);
    double acc = 0.0;
    for (std::size_t d = 0; d < close_y.size(); ++d) {
      auto r = scratch.subspan(d * T, T);
      for (std::size_t t = 0; t < T; ++t)
        acc += std::norm(close_y[d][t] - r[t]);
    }
    const std::size_t off = close_y.size() * T;
    for (std::size_t p = 0; p < far_y.size(); ++p) {
      auto r = scratch.subspan(off + p * T, T);
      for (std::size_t t = 0; t < T; ++t) acc += std::norm(far_y[p][t] - r[t]);
    }
    return acc;
  }

  // warm-started CG on the normal equations A^H A x = A^H y
  void solve_cg(std::span<cdouble> x, double tol, int max_iters) const {
    const std::size_t n = C * T;
    const std::size_t m = num_mics() * T;
    std::vector<cdouble> b(n), r(n), p(n), np(n), u(m);

    // b = A^H y
    std::vector<cdouble> y(m);
    for (std::size_t d = 0; d < close_y.size(); ++d)
      std::copy(close_y[d].begin(), close_y[d].end(), y.begin() + d * T);
    const std::size_t off = close_y.size() * T;
    for (std::size_t pp = 0; pp < far_y.size(); ++pp)
      std::copy(far_y[pp].begin(), far_y[pp].end(), y.begin() + off + pp * T);
    adjoint(y, b);

    auto applyN = [&](std::span<const cdouble> in, std::span<cdouble> out) {
      forward(in, u);
      adjoint(u, out);
    };

    applyN(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    const double b_norm = std::sqrt(norm_sq(b));
    if (b_norm == 0.0) {
      std::fill(x.begin(), x.end(), cdouble(0, 0));
      return;
    }
    double rs = norm_sq(r);
    if (std::sqrt(rs) <= tol * b_norm) return;
    std::copy(r.begin(), r.end(), p.begin());
    for (int it = 0; it < max_iters; ++it) {
      applyN(p, np);
      const cdouble pnp = dot_conj(p, np);
      if (pnp.real() <= 0.0) break;
      const double alpha = rs / pnp.real();
      for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
      for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * np[i];
      const double rs_new = norm_sq(r);
      if (std::sqrt(rs_new) <= tol * b_norm) break;
      const double beta = rs_new / rs;
      rs = rs_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    }
  }
};

std::vector<const Spectrogram*> far_mics(const MixtureSet& mix) {
  std::vector<const Spectrogram*> out;
  for (const auto& arr : mix.far_field)
    for (const auto& s : arr) out.push_back(&s);
  return out;
}

BinProblem make_bin_problem(
    const MixtureSet& mixtures, std::size_t f,
    const std::vector<std::vector<FilterBank>>& close_filters,
    const std::vector<std::vector<FilterBank>>& far_filters,
    const TapWindow& window) {
  const std::size_t C = mixtures.num_speakers();
  BinProblem prob;
  prob.T = mixtures.close_talk.front().frames();
  prob.C = C;
  prob.window = &window;
  prob.close_taps.assign(C, std::vector<std::span<const cdouble>>(C));
  for (std::size_t d = 0; d < C; ++d) {
    prob.close_y.push_back(mixtures.close_talk[d].bin(f));
    for (std::size_t c = 0; c < C; ++c)
      if (c != d && !close_filters[d][c].taps.empty())
        prob.close_taps[d][c] = close_filters[d][c].bin(f);
  }
  auto fm = far_mics(mixtures);
  prob.far_taps.assign(fm.size(), std::vector<std::span<const cdouble>>(C));
  for (std::size_t p = 0; p < fm.size(); ++p) {
    prob.far_y.push_back(fm[p]->bin(f));
    for (std::size_t c = 0; c < C; ++c)
      if (!far_filters[p][c].taps.empty())
        prob.far_taps[p][c] = far_filters[p][c].bin(f);
  }
  return prob;
}

Spectrogram spectral_diff(const Spectrogram& a, const Spectrogram& b) {
  Spectrogram out = a;
  auto o = out.raw();
  auto s = b.raw();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= s[i];
  return out;
}

void update_filters(const MixtureSet& mixtures,
                    std::span<const Spectrogram> estimates,
                    const SolverConfig& cfg, const TapWindow& window,
                    std::vector<std::vector<FilterBank>>& close_filters,
                    std::vector<std::vector<FilterBank>>& far_filters) {
  const std::size_t C = mixtures.num_speakers();
  const std::size_t T = mixtures.close_talk.front().frames();
  const std::size_t F = mixtures.close_talk.front().bins();

  auto lambda_for = [&](const Spectrogram& y) {
    if (cfg.weighting.variant == WeightVariant::Constant)
      return WeightMap(T, F, 1.0);
    return compute_lambda(y, cfg.weighting);
  };

  close_filters.assign(C, std::vector<FilterBank>(C));
  for (std::size_t d = 0; d < C; ++d) {
    if (C < 2) break;
    std::vector<const Spectrogram*> srcs;
    std::vector<std::size_t> idx;
    for (std::size_t c = 0; c < C; ++c)
      if (c != d) {
        srcs.push_back(&estimates[c]);
        idx.push_back(c);
      }
    const Spectrogram target = spectral_diff(mixtures.close_talk[d],
                                             estimates[d]);
    auto banks = estimate_fcp_filters_joint(target, srcs, window,
                                            lambda_for(mixtures.close_talk[d]));
    for (std::size_t i = 0; i < idx.size(); ++i)
      close_filters[d][idx[i]] = std::move(banks[i]);
  }

  auto fm = far_mics(mixtures);
  far_filters.assign(fm.size(), std::vector<FilterBank>(C));
  std::vector<const Spectrogram*> all_srcs;
  for (std::size_t c = 0; c < C; ++c) all_srcs.push_back(&estimates[c]);
  for (std::size_t p = 0; p < fm.size(); ++p) {
    auto banks =
        estimate_fcp_filters_joint(*fm[p], all_srcs, window, lambda_for(*fm[p]));
    for (std::size_t c = 0; c < C; ++c) far_filters[p][c] = std::move(banks[c]);
  }
}

}  // namespace

double deconvolution_objective(
    const MixtureSet& mixtures, std::span<const Spectrogram> estimates,
    const std::vector<std::vector<FilterBank>>& close_filters,
    const std::vector<std::vector<FilterBank>>& far_filters,
    const TapWindow& window) {
  const std::size_t C = mixtures.num_speakers();
  const std::size_t T = mixtures.close_talk.front().frames();
  const std::size_t F = mixtures.close_talk.front().bins();
  std::vector<cdouble> x(C * T);
  const std::size_t mics = C + mixtures.num_far_mics();
  std::vector<cdouble> scratch(mics * T);
  double acc = 0.0;
  for (std::size_t f = 0; f < F; ++f) {
    BinProblem prob =
        make_bin_problem(mixtures, f, close_filters, far_filters, window);
    for (std::size_t c = 0; c < C; ++c) {
      auto zb = estimates[c].bin(f);
      std::copy(zb.begin(), zb.end(), x.begin() + c * T);
    }
    acc += prob.objective(x, scratch);
  }
  return acc;
}

double deconvolution_objective(const MixtureSet& mixtures,
                               std::span<const Spectrogram> estimates,
                               const SolverConfig& cfg) {
  const TapWindow window{cfg.hp.taps_past, cfg.hp.taps_future, 0};
  std::vector<std::vector<FilterBank>> close_filters, far_filters;
  update_filters(mixtures, estimates, cfg, window, close_filters, far_filters);
  return deconvolution_objective(mixtures, estimates, close_filters,
                                 far_filters, window);
}

std::vector<Spectrogram> source_update_fixed_filters(
    const MixtureSet& mixtures, std::span<const Spectrogram> initial,
    const std::vector<std::vector<FilterBank>>& close_filters,
    const std::vector<std::vector<FilterBank>>& far_filters,
    const TapWindow& window, double cg_tol, int cg_max_iters) {
  const std::size_t C = mixtures.num_speakers();
  const std::size_t T = mixtures.close_talk.front().frames();
  const std::size_t F = mixtures.close_talk.front().bins();
  std::vector<Spectrogram> out(initial.begin(), initial.end());
  std::vector<cdouble> x(C * T);
  for (std::size_t f = 0; f < F; ++f) {
    BinProblem prob =
        make_bin_problem(mixtures, f, close_filters, far_filters, window);
    for (std::size_t c = 0; c < C; ++c) {
      auto zb = out[c].bin(f);
      std::copy(zb.begin(), zb.end(), x.begin() + c * T);
    }
    prob.solve_cg(x, cg_tol, cg_max_iters);
    for (std::size_t c = 0; c < C; ++c) {
      auto zb = out[c].bin(f);
      std::copy(x.begin() + c * T, x.begin() + (c + 1) * T, zb.begin());
    }
  }
  return out;
}

SolveResult solve_blind_deconvolution(
    const MixtureSet& mixtures, const SolverConfig& cfg,
    const ActivityTimeline* activity,
    std::span<const Spectrogram> provided_estimates) {
  cfg.validate();
  if (mixtures.close_talk.empty())
    throw std::invalid_argument("mixture set has no close-talk channels");
  const std::size_t C = mixtures.num_speakers();
  const Spectrogram& ref = mixtures.close_talk.front();
  const TapWindow window{cfg.hp.taps_past, cfg.hp.taps_future, 0};

  SolveResult res;
  switch (cfg.init) {
    case SolverInit::CloseTalkMixture:
      res.estimates.assign(mixtures.close_talk.begin(),
                           mixtures.close_talk.end());
      break;
    case SolverInit::Zero:
      res.estimates.assign(
          C, Spectrogram(ref.frames(), ref.bins(), ref.sample_rate(),
                         ref.window_ms(), ref.hop_ms()));
      break;
    case SolverInit::ProvidedEstimates:
      if (provided_estimates.size() != C)
        throw std::invalid_argument("provided estimate count mismatch");
      res.estimates.assign(provided_estimates.begin(),
                           provided_estimates.end());
      break;
  }

  // frame-activity mask for optional muting
  std::vector<std::vector<std::uint8_t>> frames;
  if (activity) {
    if (activity->has_frames()) {
      frames = activity->frame_activity;
    } else {
      StftConfig sc{ref.window_ms(), ref.hop_ms(), ref.sample_rate()};
      frames = activity_to_frames(*activity, sc).frame_activity;
    }
  }

  auto mute = [&](std::vector<Spectrogram>& est) {
    if (frames.empty()) return;
    for (std::size_t c = 0; c < C && c < frames.size(); ++c)
      est[c] = frame_mute(est[c], frames[c]);
  };
  mute(res.estimates);

  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < cfg.max_outer_iters; ++iter) {
    update_filters(mixtures, res.estimates, cfg, window, res.close_filters,
                   res.far_filters);
    res.estimates = source_update_fixed_filters(
        mixtures, res.estimates, res.close_filters, res.far_filters, window,
        cfg.cg_tol, cfg.cg_max_iters);
    mute(res.estimates);
    const double obj = deconvolution_objective(
        mixtures, res.estimates, res.close_filters, res.far_filters, window);
    if (!std::isfinite(obj))
      throw std::runtime_error("non-finite objective at outer iteration " +
                               std::to_string(iter));
    res.objective_trace.push_back(obj);
    if (std::isfinite(prev) && prev - obj <= cfg.convergence_rel * prev) {
      res.converged = true;
      break;
    }
    prev = obj;
  }
  return res;
}

std::vector<Spectrogram> evaluate_estimator(const Estimator& estimator,
                                            const MixtureSet& mixtures,
                                            std::size_t expected_count) {
  std::vector<Spectrogram> out = estimator(mixtures);
  if (out.size() != expected_count)
    throw std::runtime_error("estimator returned wrong channel count");
  const Spectrogram& ref = mixtures.close_talk.front();
  for (const auto& s : out)
    if (!s.same_shape(ref))
      throw std::runtime_error("estimator output shape mismatch");
  return out;
}

Estimator make_solver_estimator(const SolverConfig& cfg) {
  return [cfg](const MixtureSet& mixtures) {
    return solve_blind_deconvolution(mixtures, cfg).estimates;
  };
}

}  // namespace ctr
