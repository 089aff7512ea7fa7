#include "ctr/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace ctr::kernels {

bool avx2_supported() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Ops& select() {
  if (const char* env = std::getenv("CTR_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return scalar_ops();
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return avx2_ops();
  }
  return avx2_supported() ? avx2_ops() : scalar_ops();
}

}  // namespace

const Ops& active() {
  static const Ops& ops = select();
  return ops;
}

}  // namespace ctr::kernels
