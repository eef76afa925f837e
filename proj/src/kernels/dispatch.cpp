#include <cstdlib>
#include <string>

#include "evio/kernels.hpp"

namespace evio::kernels {

#if defined(EVIO_HAVE_AVX2_KERNELS)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_kernels() {
#if defined(EVIO_HAVE_AVX2_KERNELS)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* best_available() {
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

const KernelTable*& current() {
  static const KernelTable* table = [] {
    const char* env = std::getenv("EVIO_SIMD");
    if (env != nullptr && std::string(env) == "scalar") return &scalar_kernels();
    return best_available();
  }();
  return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

bool select(std::string_view name) {
  if (name == "scalar") {
    current() = &scalar_kernels();
    return true;
  }
  if (name == "avx2") {
    if (const KernelTable* t = avx2_kernels()) {
      current() = t;
      return true;
    }
    return false;
  }
  if (name == "auto") {
    current() = best_available();
    return true;
  }
  return false;
}

}  // namespace evio::kernels
