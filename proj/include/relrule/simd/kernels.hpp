// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

namespace relrule::simd {

/// Dense double-precision kernels behind the policy-value network.
/// Every variant must agree with the scalar reference to rounding.
struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  /// x = max(x, 0)
  void (*relu)(double* x, std::size_t n);
};

const KernelTable& scalar_kernels();

/// AVX2+FMA variant, or nullptr when not built or not supported by the CPU.
const KernelTable* avx2_kernels();

/// Chosen once per process: the widest supported variant, unless the
/// RELRULE_SIMD environment variable is set to "scalar".
const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }
inline double sum_squares(std::span<const double> x) { return active().sum_squares(x.data(), x.size()); }
inline void relu(std::span<double> x) { active().relu(x.data(), x.size()); }

}  // namespace relrule::simd
