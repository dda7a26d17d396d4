#pragma once

#include "lpsd/kernels.hpp"

// Variant tables visible to the dispatcher. Each getter exists only when its
// translation unit is compiled in (CMake defines the matching macro).

namespace lpsd::kernels {

#ifdef LPSD_KERNELS_AVX2
const Table& avx2_table();
#endif

#ifdef LPSD_KERNELS_NEON
const Table& neon_table();
#endif

} // namespace lpsd::kernels
