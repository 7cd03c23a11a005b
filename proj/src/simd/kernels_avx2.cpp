// AVX2/FMA variants, 4 lanes per iteration with a scalar tail.
// Built with -mavx2 -mfma; only called after a CPUID check.

#include "bsdelab/simd.hpp"

#include <immintrin.h>

namespace bsdelab::simd::detail {

namespace {
constexpr std::size_t LANE = 4;

inline double hsum(__m256d v) noexcept
{
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}
} // namespace

double dot_avx2(const double* a, const double* b, std::size_t n) noexcept
{
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * LANE <= n; i += 2 * LANE) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + LANE), _mm256_loadu_pd(b + i + LANE), acc1);
    }
    for (; i + LANE <= n; i += LANE)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_avx2(const double* a, std::size_t n) noexcept
{
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * LANE <= n; i += 2 * LANE) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + LANE));
    }
    for (; i + LANE <= n; i += LANE) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i];
    return s;
}

void axpy_avx2(double a, const double* x, const double* y, double* out, std::size_t n) noexcept
{
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + LANE <= n; i += LANE) {
        __m256d r = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) out[i] = y[i] + a * x[i];
}

void residual_step_avx2(double* r, const double* g, double dt, const double* z,
                        const double* db, std::size_t n) noexcept
{
    const __m256d dtv = _mm256_set1_pd(dt);
    std::size_t i = 0;
    for (; i + LANE <= n; i += LANE) {
        __m256d acc = _mm256_fmadd_pd(_mm256_loadu_pd(g + i), dtv, _mm256_loadu_pd(r + i));
        acc = _mm256_fnmadd_pd(_mm256_loadu_pd(z + i), _mm256_loadu_pd(db + i), acc);
        _mm256_storeu_pd(r + i, acc);
    }
    for (; i < n; ++i) r[i] += g[i] * dt - z[i] * db[i];
}

void affine_avx2(const double* x, double shift, double scale, double* out, std::size_t n) noexcept
{
    const __m256d sv = _mm256_set1_pd(shift);
    const __m256d kv = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + LANE <= n; i += LANE)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), sv), kv));
    for (; i < n; ++i) out[i] = (x[i] - shift) * scale;
}

void mul_avx2(const double* a, const double* b, double* out, std::size_t n) noexcept
{
    std::size_t i = 0;
    for (; i + LANE <= n; i += LANE)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

} // namespace bsdelab::simd::detail
