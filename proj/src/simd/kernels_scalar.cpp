#include "bsdelab/simd.hpp"

namespace bsdelab::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double sum_scalar(const double* a, std::size_t n) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    return s;
}

void axpy_scalar(double a, const double* x, const double* y, double* out, std::size_t n) noexcept
{
    for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + a * x[i];
}

void residual_step_scalar(double* r, const double* g, double dt, const double* z,
                          const double* db, std::size_t n) noexcept
{
    for (std::size_t i = 0; i < n; ++i) r[i] += g[i] * dt - z[i] * db[i];
}

void affine_scalar(const double* x, double shift, double scale, double* out, std::size_t n) noexcept
{
    for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - shift) * scale;
}

void mul_scalar(const double* a, const double* b, double* out, std::size_t n) noexcept
{
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

} // namespace bsdelab::simd::detail
