#include <cstdlib>
#include <string_view>

#include "peidia/kernels.hpp"

namespace peidia::kernels {

bool avx2_supported() {
#if defined(PEIDIA_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& select() {
  const char* env = std::getenv("PEIDIA_SIMD");
  const std::string_view choice = env ? env : "auto";
  if (choice == "scalar") return scalar_table();
#if defined(PEIDIA_HAVE_AVX2)
  if (avx2_supported()) return avx2_table();
#endif
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace peidia::kernels
