#include "kbqa/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace kbqa::kern {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable& select() {
    const char* force = std::getenv("KBQA_KERNELS");
    if (force != nullptr) {
        if (std::strcmp(force, "scalar") == 0) return scalar_kernels();
        if (std::strcmp(force, "avx2") == 0) {
            if (avx2_kernels() != nullptr && cpu_has_avx2()) return *avx2_kernels();
            std::fprintf(stderr, "kbqa: KBQA_KERNELS=avx2 requested but unavailable; using scalar\n");
            return scalar_kernels();
        }
        std::fprintf(stderr, "kbqa: unknown KBQA_KERNELS value '%s'; using auto selection\n", force);
    }
    if (avx2_kernels() != nullptr && cpu_has_avx2()) return *avx2_kernels();
    return scalar_kernels();
}

} // namespace

const KernelTable& kernels() {
    static const KernelTable& chosen = select();
    return chosen;
}

} // namespace kbqa::kern
