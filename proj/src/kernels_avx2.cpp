// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "frailsim/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <cmath>

namespace frailsim::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void gemv_colmajor(std::span<const double> a, std::size_t n, std::span<const double> x,
                   double offset, std::span<double> y) {
  const std::size_t k = x.size();
  const std::size_t n4 = n & ~std::size_t{3};
  std::size_t i = 0;
  for (; i < n4; i += 4) {
    __m256d acc = _mm256_set1_pd(offset);
    for (std::size_t j = 0; j < k; ++j) {
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + j * n + i), _mm256_set1_pd(x[j]), acc);
    }
    _mm256_storeu_pd(y.data() + i, acc);
  }
  for (; i < n; ++i) {
    double s = offset;
    for (std::size_t j = 0; j < k; ++j) s = std::fma(a[j * n + i], x[j], s);
    y[i] = s;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4),
                           acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void segment_sum(std::span<const double> v, std::span<const std::size_t> offsets,
                 std::span<double> out) {
  for (std::size_t c = 0; c + 1 < offsets.size(); ++c) {
    std::size_t i = offsets[c];
    const std::size_t end = offsets[c + 1];
    double s = 0.0;
    if (end - i >= 8) {
      __m256d acc = _mm256_setzero_pd();
      for (; i + 4 <= end; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(v.data() + i));
      s = hsum(acc);
    }
    for (; i < end; ++i) s += v[i];
    out[c] = s;
  }
}

void add_scaled(std::span<const double> x, std::span<const double> treat, double beta,
                std::span<double> y) {
  const std::size_t n = x.size();
  const __m256d b = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y.data() + i, _mm256_fmadd_pd(_mm256_loadu_pd(treat.data() + i), b,
                                                   _mm256_loadu_pd(x.data() + i)));
  }
  for (; i < n; ++i) y[i] = x[i] + beta * treat[i];
}

}  // namespace

const KernelTable table{"avx2", gemv_colmajor, dot, segment_sum, add_scaled};

}  // namespace frailsim::kernels::avx2
#endif
