#pragma once

#include "emgait/simd/kernels.hpp"

namespace emgait::simd::detail {

const KernelTable* avx2_table() noexcept;

}  // namespace emgait::simd::detail
