#include "bsdelab/simd.hpp"

#include <cstdlib>
#include <string_view>

namespace bsdelab::simd {

const Kernels& scalar_kernels()
{
    static const Kernels k{"scalar",
                           detail::dot_scalar,
                           detail::sum_scalar,
                           detail::axpy_scalar,
                           detail::residual_step_scalar,
                           detail::affine_scalar,
                           detail::mul_scalar};
    return k;
}

const Kernels* avx2_kernels()
{
#if defined(__x86_64__) || defined(__i386__)
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    static const Kernels k{"avx2",
                           detail::dot_avx2,
                           detail::sum_avx2,
                           detail::axpy_avx2,
                           detail::residual_step_avx2,
                           detail::affine_avx2,
                           detail::mul_avx2};
    return ok ? &k : nullptr;
#else
    return nullptr;
#endif
}

const Kernels& active()
{
    static const Kernels& chosen = [&]() -> const Kernels& {
        const char* env = std::getenv("BSDELAB_SIMD");
        if (env && std::string_view(env) == "scalar") return scalar_kernels();
        if (const Kernels* k = avx2_kernels()) return *k;
        return scalar_kernels();
    }();
    return chosen;
}

} // namespace bsdelab::simd
