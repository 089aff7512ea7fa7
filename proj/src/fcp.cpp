#include "ctr/fcp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "ctr/kernels.hpp"

namespace ctr {

namespace {

using MatXc = Eigen::MatrixXcd;
using VecXc = Eigen::VectorXcd;

// Weighted inner product sum_t conj(a[t+sa]) * b[t+sb] * w[t] over the frame
// range where both shifted reads are in bounds; everything else is zero.
cdouble shifted_wdot(std::span<const cdouble> a, int sa,
                     std::span<const cdouble> b, int sb,
                     std::span<const double> w) {
  const int T = static_cast<int>(w.size());
  const int t0 = std::max({0, -sa, -sb});
  const int t1 = std::min({T - 1, T - 1 - sa, T - 1 - sb});
  if (t1 < t0) return {0.0, 0.0};
  const std::size_t len = static_cast<std::size_t>(t1 - t0 + 1);
  return kernels::active().cdot_conj_weighted(a.data() + t0 + sa,
                                              b.data() + t0 + sb,
                                              w.data() + t0, len);
}

}  // namespace

WeightMap compute_lambda(const Spectrogram& ref, const WeightingMode& mode) {
  mode.validate();
  const std::size_t T = ref.frames();
  const std::size_t F = ref.bins();
  WeightMap out(T, F);
  if (mode.variant == WeightVariant::Constant) return out;

  // power spectrogram, bin-major like the input
  std::vector<double> power(T * F);
  kernels::active().mag_sq(ref.raw().data(), power.data(), T * F);

  double floor = 0.0;
  if (mode.variant == WeightVariant::MaxFloor) {
    floor = *std::max_element(power.begin(), power.end());
  } else {
    // per-frame maxima, then the requested percentile
    std::vector<double> frame_max(T, 0.0);
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t t = 0; t < T; ++t)
        frame_max[t] = std::max(frame_max[t], power[f * T + t]);
    std::sort(frame_max.begin(), frame_max.end());
    // nearest-rank on the sorted maxima
    const double pos = mode.quantile / 100.0 * static_cast<double>(T - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, T - 1);
    const double frac = pos - static_cast<double>(lo);
    floor = frame_max[lo] * (1.0 - frac) + frame_max[hi] * frac;
  }
  if (floor <= 0.0)
    throw std::invalid_argument("degenerate reference: all-zero weighting floor");

  for (std::size_t f = 0; f < F; ++f) {
    auto wb = out.bin(f);
    const double* pb = power.data() + f * T;
    for (std::size_t t = 0; t < T; ++t) wb[t] = mode.xi * floor + pb[t];
  }
  return out;
}

FilterBank estimate_fcp_filter(const Spectrogram& target,
                               const Spectrogram& source,
                               const TapWindow& window,
                               const WeightMap& lambda) {
  if (!target.same_shape(source))
    throw std::invalid_argument("target/source shape mismatch");
  if (lambda.frames() != target.frames() || lambda.bins() != target.bins())
    throw std::invalid_argument("weight map shape mismatch");
  const std::size_t T = target.frames();
  const std::size_t F = target.bins();
  const std::size_t K = window.tap_count();

  FilterBank bank(F, K);
  std::vector<double> w(T);
  MatXc A(K, K);
  VecXc b(K);
  for (std::size_t f = 0; f < F; ++f) {
    auto lam = lambda.bin(f);
    for (std::size_t t = 0; t < T; ++t) w[t] = 1.0 / lam[t];
    auto z = source.bin(f);
    auto y = target.bin(f);
    // normal equations: A g = b with
    //   A_{jk} = sum_t w z_j conj(z_k),  b_j = sum_t w z_j conj(y)
    for (std::size_t j = 0; j < K; ++j) {
      for (std::size_t k = 0; k <= j; ++k) {
        const cdouble v =
            std::conj(shifted_wdot(z, window.shift(j), z, window.shift(k), w));
        A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = v;
        A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
            std::conj(v);
      }
      b(static_cast<Eigen::Index>(j)) =
          std::conj(shifted_wdot(z, window.shift(j), y, 0, w));
    }

    const double tr = A.real().trace();
    auto g = bank.bin(f);
    if (!(tr > 0.0)) {
      // silent bin: zero filter
      bank.regularized = true;
      continue;
    }
    VecXc sol = A.ldlt().solve(b);
    const double resid = (A * sol - b).norm();
    if (!sol.allFinite() || resid > 1e-8 * b.norm() + 1e-300) {
      const double ridge = 1e-10 * tr / static_cast<double>(K);
      MatXc Ar = A;
      Ar.diagonal().array() += ridge;
      sol = Ar.ldlt().solve(b);
      bank.regularized = true;
    }
    for (std::size_t k = 0; k < K; ++k)
      g[k] = sol(static_cast<Eigen::Index>(k));
  }
  return bank;
}

std::vector<FilterBank> estimate_fcp_filters_joint(
    const Spectrogram& target, std::span<const Spectrogram* const> sources,
    const TapWindow& window, const WeightMap& lambda) {
  const std::size_t S = sources.size();
  if (S == 0) return {};
  for (const auto* s : sources)
    if (!target.same_shape(*s))
      throw std::invalid_argument("target/source shape mismatch");
  const std::size_t T = target.frames();
  const std::size_t F = target.bins();
  const std::size_t K = window.tap_count();
  const std::size_t n = S * K;

  std::vector<FilterBank> banks(S, FilterBank(F, K));
  std::vector<double> w(T);
  MatXc A(n, n);
  VecXc b(n);
  for (std::size_t f = 0; f < F; ++f) {
    auto lam = lambda.bin(f);
    for (std::size_t t = 0; t < T; ++t) w[t] = 1.0 / lam[t];
    auto y = target.bin(f);
    for (std::size_t sj = 0; sj < S; ++sj) {
      auto zj = sources[sj]->bin(f);
      for (std::size_t j = 0; j < K; ++j) {
        const std::size_t row = sj * K + j;
        for (std::size_t sk = 0; sk < S; ++sk) {
          auto zk = sources[sk]->bin(f);
          for (std::size_t k = 0; k < K; ++k) {
            const std::size_t col = sk * K + k;
            if (col > row) continue;
            const cdouble v = std::conj(
                shifted_wdot(zj, window.shift(j), zk, window.shift(k), w));
            A(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                v;
            A(static_cast<Eigen::Index>(col), static_cast<Eigen::Index>(row)) =
                std::conj(v);
          }
        }
        b(static_cast<Eigen::Index>(row)) =
            std::conj(shifted_wdot(zj, window.shift(j), y, 0, w));
      }
    }
    const double tr = A.real().trace();
    if (!(tr > 0.0)) continue;  // all sources silent in this bin
    // always lightly regularized: joint systems couple correlated sources
    MatXc Ar = A;
    Ar.diagonal().array() += 1e-12 * tr / static_cast<double>(n);
    VecXc sol = Ar.ldlt().solve(b);
    if (!sol.allFinite()) {
      Ar.diagonal().array() += 1e-8 * tr / static_cast<double>(n);
      sol = Ar.ldlt().solve(b);
    }
    for (std::size_t s = 0; s < S; ++s) {
      auto g = banks[s].bin(f);
      for (std::size_t k = 0; k < K; ++k)
        g[k] = sol(static_cast<Eigen::Index>(s * K + k));
    }
  }
  return banks;
}

Spectrogram apply_filter(const FilterBank& bank, const Spectrogram& source,
                         const TapWindow& window) {
  const std::size_t K = window.tap_count();
  if (bank.taps_per_bin != K)
    throw std::invalid_argument("filter tap count does not match window");
  if (bank.bins != source.bins())
    throw std::invalid_argument("filter bin count does not match source");
  const std::size_t T = source.frames();
  Spectrogram out(T, source.bins(), source.sample_rate(), source.window_ms(),
                  source.hop_ms());
  for (std::size_t f = 0; f < source.bins(); ++f) {
    auto z = source.bin(f);
    auto g = bank.bin(f);
    auto o = out.bin(f);
    for (std::size_t k = 0; k < K; ++k) {
      const int s = window.shift(k);
      const std::size_t len = T - static_cast<std::size_t>(std::abs(s));
      if (len == 0 || static_cast<std::size_t>(std::abs(s)) >= T) continue;
      const std::size_t src0 = static_cast<std::size_t>(std::max(s, 0));
      const std::size_t dst0 = static_cast<std::size_t>(std::max(-s, 0));
      kernels::active().caxpy(std::conj(g[k]), z.data() + src0, o.data() + dst0,
                              len);
    }
  }
  return out;
}

double fcp_objective(const Spectrogram& target, const Spectrogram& source,
                     const FilterBank& bank, const TapWindow& window,
                     const WeightMap& lambda) {
  Spectrogram pred = apply_filter(bank, source, window);
  const std::size_t T = target.frames();
  double acc = 0.0;
  std::vector<double> w(T);
  for (std::size_t f = 0; f < target.bins(); ++f) {
    auto lam = lambda.bin(f);
    for (std::size_t t = 0; t < T; ++t) w[t] = 1.0 / lam[t];
    acc += kernels::active().weighted_residual_sq(
        target.bin(f).data(), pred.bin(f).data(), w.data(), T);
  }
  return acc;
}

}  // namespace ctr
