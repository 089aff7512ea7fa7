#include "ctr/kernels.hpp"

namespace ctr::kernels {
namespace {

cdouble cdot_conj_scalar(const cdouble* x, const cdouble* y, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i].real(), b = x[i].imag();
    const double c = y[i].real(), d = y[i].imag();
    re += a * c + b * d;
    im += a * d - b * c;
  }
  return {re, im};
}

cdouble cdot_conj_weighted_scalar(const cdouble* x, const cdouble* y,
                                  const double* w, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = x[i].real(), b = x[i].imag();
    const double c = y[i].real(), d = y[i].imag();
    re += (a * c + b * d) * w[i];
    im += (a * d - b * c) * w[i];
  }
  return {re, im};
}

void caxpy_scalar(cdouble a, const cdouble* x, cdouble* y, std::size_t n) {
  const double ar = a.real(), ai = a.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += cdouble(ar * xr - ai * xi, ar * xi + ai * xr);
  }
}

void mag_sq_scalar(const cdouble* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
}

double weighted_residual_sq_scalar(const cdouble* y, const cdouble* x,
                                   const double* w, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double er = y[i].real() - x[i].real();
    const double ei = y[i].imag() - x[i].imag();
    acc += (er * er + ei * ei) * w[i];
  }
  return acc;
}

double sum_mag_sq_scalar(const cdouble* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  return acc;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {cdot_conj_scalar,
                          cdot_conj_weighted_scalar,
                          caxpy_scalar,
                          mag_sq_scalar,
                          weighted_residual_sq_scalar,
                          sum_mag_sq_scalar,
                          "scalar"};
  return ops;
}

}  // namespace ctr::kernels
