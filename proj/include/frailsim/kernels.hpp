#pragma once

// Data-parallel inner loops of the likelihood. Every kernel has a scalar
// reference and, on x86-64, an AVX2+FMA variant. The active table is picked
// once at startup from CPUID; FRAILSIM_KERNELS=scalar forces the reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace frailsim::kernels {

struct KernelTable {
  std::string_view name;

  // y[i] = offset + sum_j a[j * n + i] * x[j]   (a is column-major n x k)
  void (*gemv_colmajor)(std::span<const double> a, std::size_t n, std::span<const double> x,
                        double offset, std::span<double> y);

  // sum_i a[i] * b[i]
  double (*dot)(std::span<const double> a, std::span<const double> b);

  // out[c] = sum of v over [offsets[c], offsets[c + 1])
  void (*segment_sum)(std::span<const double> v, std::span<const std::size_t> offsets,
                      std::span<double> out);

  // y[i] = x[i] + beta * treat[i]   (treat is 0/1 stored as double)
  void (*add_scaled)(std::span<const double> x, std::span<const double> treat, double beta,
                     std::span<double> y);
};

namespace scalar {
extern const KernelTable table;
}

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
extern const KernelTable table;
}
#endif

/// True when the running CPU can execute the AVX2 table.
bool avx2_supported() noexcept;

/// The table chosen for this process.
const KernelTable& active() noexcept;

}  // namespace frailsim::kernels
