#pragma once

// Data-parallel inner loops used by feature extraction, the convolutional
// network and the linear classifiers. Each kernel has a scalar reference and
// (on x86-64) an AVX2/FMA variant; the variant is chosen once at startup from
// CPUID and can be forced with EMGAIT_SIMD=scalar|avx2.

#include <cstddef>
#include <span>
#include <string_view>

namespace emgait::simd {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b) noexcept;

struct KernelTable {
  Backend backend;
  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // sum_i x[i]
  double (*sum)(const double* x, std::size_t n);
  // sum_i |x[i]|
  double (*sum_abs)(const double* x, std::size_t n);
  // sum_i (x[i] - mean)^2
  double (*sum_sq_dev)(const double* x, std::size_t n, double mean);
  // sum_i |x[i] - mean|
  double (*sum_abs_dev)(const double* x, std::size_t n, double mean);
  // #{i < n-1 : x[i]*x[i+1] < 0 and |x[i]-x[i+1]| >= theta}
  std::size_t (*zero_crossings)(const double* x, std::size_t n, double theta);
  // y[i] = max(y[i], 0)
  void (*relu)(double* y, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;
bool backend_available(Backend b) noexcept;
/// Table for `b`; falls back to scalar when `b` is unavailable on this CPU/build.
const KernelTable& kernels_for(Backend b) noexcept;
/// Process-wide active table.
const KernelTable& kernels() noexcept;
Backend active_backend() noexcept;
/// Overrides the active backend (tests, benchmarks). Not thread-safe against
/// concurrent kernel use.
void set_active_backend(Backend b) noexcept;

inline double dot(std::span<const double> x, std::span<const double> y) {
  return kernels().dot(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  kernels().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace emgait::simd
