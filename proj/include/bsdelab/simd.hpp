#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Hot inner loops over path arrays. A scalar reference table and an AVX2+FMA
// table are compiled; the active one is chosen once at first use from CPUID.
// Setting BSDELAB_SIMD=scalar in the environment forces the reference path.
namespace bsdelab::simd {

struct Kernels {
    std::string_view name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    // out[i] = y[i] + a * x[i]
    void (*axpy)(double a, const double* x, const double* y, double* out, std::size_t n);
    // r[i] += g[i] * dt - z[i] * db[i]
    void (*residual_step)(double* r, const double* g, double dt, const double* z,
                          const double* db, std::size_t n);
    // out[i] = (x[i] - shift) * scale
    void (*affine)(const double* x, double shift, double scale, double* out, std::size_t n);
    // out[i] = a[i] * b[i]
    void (*mul)(const double* a, const double* b, double* out, std::size_t n);
};

const Kernels& scalar_kernels();
// nullptr when the CPU lacks AVX2 or FMA.
const Kernels* avx2_kernels();
const Kernels& active();

inline double dot(std::span<const double> a, std::span<const double> b)
{
    return active().dot(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }
inline void axpy(double a, std::span<const double> x, std::span<const double> y, std::span<double> out)
{
    active().axpy(a, x.data(), y.data(), out.data(), out.size());
}
inline void residual_step(std::span<double> r, std::span<const double> g, double dt,
                          std::span<const double> z, std::span<const double> db)
{
    active().residual_step(r.data(), g.data(), dt, z.data(), db.data(), r.size());
}
inline void affine(std::span<const double> x, double shift, double scale, std::span<double> out)
{
    active().affine(x.data(), shift, scale, out.data(), out.size());
}
inline void mul(std::span<const double> a, std::span<const double> b, std::span<double> out)
{
    active().mul(a.data(), b.data(), out.data(), out.size());
}

namespace detail {
double dot_scalar(const double*, const double*, std::size_t) noexcept;
double sum_scalar(const double*, std::size_t) noexcept;
void axpy_scalar(double, const double*, const double*, double*, std::size_t) noexcept;
void residual_step_scalar(double*, const double*, double, const double*, const double*, std::size_t) noexcept;
void affine_scalar(const double*, double, double, double*, std::size_t) noexcept;
void mul_scalar(const double*, const double*, double*, std::size_t) noexcept;

double dot_avx2(const double*, const double*, std::size_t) noexcept;
double sum_avx2(const double*, std::size_t) noexcept;
void axpy_avx2(double, const double*, const double*, double*, std::size_t) noexcept;
void residual_step_avx2(double*, const double*, double, const double*, const double*, std::size_t) noexcept;
void affine_avx2(const double*, double, double, double*, std::size_t) noexcept;
void mul_avx2(const double*, const double*, double*, std::size_t) noexcept;
} // namespace detail

} // namespace bsdelab::simd
