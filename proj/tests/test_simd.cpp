#include "doctest.h"

#include "bsdelab/simd.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace bsdelab;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed)
{
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (auto& x : v) x = nd(eng);
    return v;
}

// sums may reassociate; everything elementwise must match bit for bit
double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace

TEST_SUITE("simd")
{
    TEST_CASE("active table is one of the compiled ones")
    {
        const auto& k = simd::active();
        CHECK((k.name == "scalar" || k.name == "avx2"));
        if (std::getenv("BSDELAB_SIMD") && std::string_view(std::getenv("BSDELAB_SIMD")) == "scalar")
            CHECK(k.name == "scalar");
    }

    TEST_CASE("avx2 kernels equal the scalar reference")
    {
        const simd::Kernels* v = simd::avx2_kernels();
        if (!v) {
            MESSAGE("cpu lacks avx2/fma; nothing to compare");
            return;
        }
        const auto& s = simd::scalar_kernels();
        for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u, 1000u, 4099u}) {
            CAPTURE(n);
            const auto a = noise(n, 1), b = noise(n, 2), c = noise(n, 3);
            CHECK(rel(v->dot(a.data(), b.data(), n), s.dot(a.data(), b.data(), n)) <= 1e-13);
            CHECK(rel(v->sum(a.data(), n), s.sum(a.data(), n)) <= 1e-13);

            std::vector<double> o1(n), o2(n);
            v->axpy(0.37, a.data(), b.data(), o1.data(), n);
            s.axpy(0.37, a.data(), b.data(), o2.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-15 * (1 + std::abs(o2[i])));

            v->affine(a.data(), 0.5, 2.0, o1.data(), n);
            s.affine(a.data(), 0.5, 2.0, o2.data(), n);
            CHECK(o1 == o2);
            v->mul(a.data(), b.data(), o1.data(), n);
            s.mul(a.data(), b.data(), o2.data(), n);
            CHECK(o1 == o2);

            auto r1 = c, r2 = c;
            v->residual_step(r1.data(), a.data(), 0.01, b.data(), c.data(), n);
            s.residual_step(r2.data(), a.data(), 0.01, b.data(), c.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(r1[i] - r2[i]) <= 1e-15 * (1 + std::abs(r2[i])));
        }
    }

    TEST_CASE("scalar reference values")
    {
        const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 2, 2, 2, 2};
        const auto& s = simd::scalar_kernels();
        CHECK(s.dot(a.data(), b.data(), 5) == 30);
        CHECK(s.sum(a.data(), 5) == 15);
        std::vector<double> r{0, 0, 0, 0, 0};
        s.residual_step(r.data(), a.data(), 0.5, b.data(), a.data(), 5);
        // g dt - z db = 0.5 a - 2 a
        CHECK(r[4] == doctest::Approx(-7.5));
    }
}
