#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace emgait::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(EMGAIT_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("EMGAIT_SIMD")) {
    if (std::string_view(env) == "scalar") return &scalar_kernels();
  }
  return &kernels_for(Backend::avx2);
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "unknown";
}

bool backend_available(Backend b) noexcept {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2();
  }
  return false;
}

const KernelTable& kernels_for(Backend b) noexcept {
#if defined(EMGAIT_HAVE_AVX2)
  if (b == Backend::avx2 && backend_available(b)) return *detail::avx2_table();
#endif
  (void)b;
  return scalar_kernels();
}

const KernelTable& kernels() noexcept { return *active_slot().load(std::memory_order_acquire); }

Backend active_backend() noexcept { return kernels().backend; }

void set_active_backend(Backend b) noexcept {
  active_slot().store(&kernels_for(b), std::memory_order_release);
}

}  // namespace emgait::simd
