#include <cstdlib>
#include <string_view>

#include "roughvol/simd.hpp"

namespace roughvol::simd {

#if defined(ROUGHVOL_BUILD_AVX2)
const KernelTable& avx2_kernel_table() noexcept;
#endif

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable* avx2_kernels() noexcept {
#if defined(ROUGHVOL_BUILD_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& select() noexcept {
  if (const char* env = std::getenv("ROUGHVOL_SIMD")) {
    if (std::string_view(env) == "scalar") return scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return *t;
  return scalar_kernels();
}

}  // namespace

const KernelTable& kernels() noexcept {
  static const KernelTable& active = select();
  return active;
}

}  // namespace roughvol::simd
