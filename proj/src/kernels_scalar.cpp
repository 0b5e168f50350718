#include "frailsim/kernels.hpp"

namespace frailsim::kernels::scalar {
namespace {

void gemv_colmajor(std::span<const double> a, std::size_t n, std::span<const double> x,
                   double offset, std::span<double> y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = offset;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double xj = x[j];
    const double* col = a.data() + j * n;
    for (std::size_t i = 0; i < n; ++i) y[i] += col[i] * xj;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void segment_sum(std::span<const double> v, std::span<const std::size_t> offsets,
                 std::span<double> out) {
  for (std::size_t c = 0; c + 1 < offsets.size(); ++c) {
    double s = 0.0;
    for (std::size_t i = offsets[c]; i < offsets[c + 1]; ++i) s += v[i];
    out[c] = s;
  }
}

void add_scaled(std::span<const double> x, std::span<const double> treat, double beta,
                std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + beta * treat[i];
}

}  // namespace

const KernelTable table{"scalar", gemv_colmajor, dot, segment_sum, add_scaled};

}  // namespace frailsim::kernels::scalar
