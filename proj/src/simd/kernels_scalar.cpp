#include <cmath>

#include "emgait/simd/kernels.hpp"

namespace emgait::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sum_abs_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
  return acc;
}

double sum_sq_dev_scalar(const double* x, std::size_t n, double mean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

double sum_abs_dev_scalar(const double* x, std::size_t n, double mean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(x[i] - mean);
  return acc;
}

std::size_t zero_crossings_scalar(const double* x, std::size_t n, double theta) {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (x[i] * x[i + 1] < 0.0 && std::fabs(x[i] - x[i + 1]) >= theta) ++count;
  }
  return count;
}

void relu_scalar(double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
}

constexpr KernelTable kScalar{
    Backend::scalar,   dot_scalar,         axpy_scalar,           sum_scalar,
    sum_abs_scalar,    sum_sq_dev_scalar,  sum_abs_dev_scalar,    zero_crossings_scalar,
    relu_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace emgait::simd
