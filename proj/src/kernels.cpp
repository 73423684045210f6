#include "collapse/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace collapse::kern {

#if COLLAPSE_BUILD_AVX2
const Kernels* avx2_table();  // kernels_avx2.cpp
#endif

const Kernels* avx2() {
#if COLLAPSE_BUILD_AVX2
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2_table();
#endif
  return nullptr;
}

namespace {

const Kernels& pick() {
  const char* force = std::getenv("COLLAPSE_LAB_SIMD");
  if (force != nullptr && std::strcmp(force, "scalar") == 0) return scalar();
  if (const Kernels* v = avx2()) return *v;
  return scalar();
}

}  // namespace

const Kernels& active() {
  static const Kernels& table = pick();
  return table;
}

}  // namespace collapse::kern
