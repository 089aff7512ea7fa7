// AVX2 variants of the complex inner-loop kernels. This translation unit is
// compiled with -mavx2 -mfma; callers must check avx2_supported() first.

#include "ctr/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define CTR_HAVE_AVX2_BUILD 1
#else
#define CTR_HAVE_AVX2_BUILD 0
#endif

namespace ctr::kernels {

#if CTR_HAVE_AVX2_BUILD

namespace {

// Doubles are interleaved [re, im, re, im]; one __m256d holds two complex.

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// [w0, w0, w1, w1] from two consecutive weights
inline __m256d dup_weights(const double* w) {
  __m256d v = _mm256_castpd128_pd256(_mm_loadu_pd(w));
  return _mm256_permute4x64_pd(v, 0x50);
}

cdouble cdot_conj_avx2(const cdouble* x, const cdouble* y, std::size_t n) {
  const double* xd = reinterpret_cast<const double*>(x);
  const double* yd = reinterpret_cast<const double*>(y);
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  const __m256d sign = _mm256_set_pd(1.0, -1.0, 1.0, -1.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    acc_re = _mm256_fmadd_pd(xv, yv, acc_re);
    __m256d xs = _mm256_permute_pd(xv, 0x5);  // [xi, xr]
    // im contribution per pair: xr*yi - xi*yr
    acc_im = _mm256_fmadd_pd(_mm256_mul_pd(xs, sign), yv, acc_im);
  }
  double re = hsum(acc_re);
  double im = hsum(acc_im);
  for (; i < n; ++i) {
    const double a = x[i].real(), b = x[i].imag();
    const double c = y[i].real(), d = y[i].imag();
    re += a * c + b * d;
    im += a * d - b * c;
  }
  return {re, im};
}

cdouble cdot_conj_weighted_avx2(const cdouble* x, const cdouble* y,
                                const double* w, std::size_t n) {
  const double* xd = reinterpret_cast<const double*>(x);
  const double* yd = reinterpret_cast<const double*>(y);
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  const __m256d sign = _mm256_set_pd(1.0, -1.0, 1.0, -1.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    __m256d ww = dup_weights(w + i);
    __m256d yw = _mm256_mul_pd(yv, ww);
    acc_re = _mm256_fmadd_pd(xv, yw, acc_re);
    __m256d xs = _mm256_permute_pd(xv, 0x5);
    acc_im = _mm256_fmadd_pd(_mm256_mul_pd(xs, sign), yw, acc_im);
  }
  double re = hsum(acc_re);
  double im = hsum(acc_im);
  for (; i < n; ++i) {
    const double a = x[i].real(), b = x[i].imag();
    const double c = y[i].real(), d = y[i].imag();
    re += (a * c + b * d) * w[i];
    im += (a * d - b * c) * w[i];
  }
  return {re, im};
}

void caxpy_avx2(cdouble a, const cdouble* x, cdouble* y, std::size_t n) {
  const double* xd = reinterpret_cast<const double*>(x);
  double* yd = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set_pd(a.imag(), -a.imag(), a.imag(), -a.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xd + 2 * i);
    __m256d yv = _mm256_loadu_pd(yd + 2 * i);
    __m256d xs = _mm256_permute_pd(xv, 0x5);
    __m256d r = _mm256_fmadd_pd(ar, xv, _mm256_mul_pd(ai, xs));
    _mm256_storeu_pd(yd + 2 * i, _mm256_add_pd(yv, r));
  }
  const double are = a.real(), aim = a.imag();
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += cdouble(are * xr - aim * xi, are * xi + aim * xr);
  }
}

void mag_sq_avx2(const cdouble* x, double* out, std::size_t n) {
  const double* xd = reinterpret_cast<const double*>(x);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d a = _mm256_loadu_pd(xd + 2 * i);
    __m256d b = _mm256_loadu_pd(xd + 2 * i + 4);
    __m256d h = _mm256_hadd_pd(_mm256_mul_pd(a, a), _mm256_mul_pd(b, b));
    // hadd interleaves lanes: [m0, m2, m1, m3] -> restore order
    _mm256_storeu_pd(out + i, _mm256_permute4x64_pd(h, 0xD8));
  }
  for (; i < n; ++i)
    out[i] = x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
}

double weighted_residual_sq_avx2(const cdouble* y, const cdouble* x,
                                 const double* w, std::size_t n) {
  const double* xd = reinterpret_cast<const double*>(x);
  const double* yd = reinterpret_cast<const double*>(y);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d e = _mm256_sub_pd(_mm256_loadu_pd(yd + 2 * i),
                              _mm256_loadu_pd(xd + 2 * i));
    __m256d ww = dup_weights(w + i);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(e, e), ww, acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) {
    const double er = y[i].real() - x[i].real();
    const double ei = y[i].imag() - x[i].imag();
    r += (er * er + ei * ei) * w[i];
  }
  return r;
}

double sum_mag_sq_avx2(const cdouble* x, std::size_t n) {
  const double* xd = reinterpret_cast<const double*>(x);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d v = _mm256_loadu_pd(xd + 2 * i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i)
    r += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return r;
}

}  // namespace

const Ops& avx2_ops() {
  static const Ops ops = {cdot_conj_avx2,
                          cdot_conj_weighted_avx2,
                          caxpy_avx2,
                          mag_sq_avx2,
                          weighted_residual_sq_avx2,
                          sum_mag_sq_avx2,
                          "avx2"};
  return ops;
}

#else

const Ops& avx2_ops() { return scalar_ops(); }

#endif  // CTR_HAVE_AVX2_BUILD

}  // namespace ctr::kernels
