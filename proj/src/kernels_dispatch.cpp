#include <cstdlib>
#include <string_view>

#include "frailsim/kernels.hpp"

namespace frailsim::kernels {

bool avx2_supported() noexcept {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable& select() noexcept {
  const char* forced = std::getenv("FRAILSIM_KERNELS");
  if (forced != nullptr && std::string_view(forced) == "scalar") return scalar::table;
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_supported()) return avx2::table;
#endif
  return scalar::table;
}

}  // namespace

const KernelTable& active() noexcept {
  static const KernelTable& table = select();
  return table;
}

}  // namespace frailsim::kernels
