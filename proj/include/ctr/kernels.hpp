#pragma once

// Data-parallel inner loops shared by the filtering and loss code.
//
// Each kernel has a scalar reference implementation and an AVX2 variant.
// The active variant is chosen once at startup from CPU capabilities and can
// be forced through the CTR_KERNELS environment variable ("scalar" or
// "avx2"). Within one variant, summation order is fixed, so results are
// bit-identical across runs and thread counts.

#include <complex>
#include <cstddef>

namespace ctr::kernels {

using cdouble = std::complex<double>;

struct Ops {
  // sum over i of conj(x[i]) * y[i]
  cdouble (*cdot_conj)(const cdouble* x, const cdouble* y, std::size_t n);
  // sum over i of conj(x[i]) * y[i] * w[i]
  cdouble (*cdot_conj_weighted)(const cdouble* x, const cdouble* y,
                                const double* w, std::size_t n);
  // y[i] += a * x[i]
  void (*caxpy)(cdouble a, const cdouble* x, cdouble* y, std::size_t n);
  // out[i] = |x[i]|^2
  void (*mag_sq)(const cdouble* x, double* out, std::size_t n);
  // sum over i of w[i] * |y[i] - x[i]|^2
  double (*weighted_residual_sq)(const cdouble* y, const cdouble* x,
                                 const double* w, std::size_t n);
  // sum over i of |x[i]|^2
  double (*sum_mag_sq)(const cdouble* x, std::size_t n);
  const char* name;
};

// Scalar reference kernels; always available.
const Ops& scalar_ops();

// AVX2 kernels; only valid to call when avx2_supported().
const Ops& avx2_ops();

bool avx2_supported();

// Variant selected at startup (CPU detection + CTR_KERNELS override).
const Ops& active();

}  // namespace ctr::kernels
