// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <string_view>

#include "rawdn/simd/kernels.hpp"

namespace rawdn::simd {

#if defined(RAWDN_HAVE_AVX2)
const KernelTable* avx2_kernels_impl();
#endif

const KernelTable* avx2_kernels() {
#if defined(RAWDN_HAVE_AVX2)
    return avx2_kernels_impl();
#else
    return nullptr;
#endif
}

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable& table = [] () -> const KernelTable& {
        const char* env = std::getenv("RAWDN_KERNELS");
        if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
        if (const KernelTable* avx2 = avx2_kernels(); avx2 != nullptr && cpu_has_avx2()) return *avx2;
        return scalar_kernels();
    }();
    return table;
}

}  // namespace rawdn::simd
