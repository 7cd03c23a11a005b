#include "doctest.h"

#include "bsdelab/common.hpp"
#include "bsdelab/interpolation.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/quadrature.hpp"

#include <cmath>
#include <numeric>

using namespace bsdelab;

TEST_CASE("gauss-hermite integrates standard normal moments")
{
    const auto& q = gauss_hermite(24);
    double w = 0, m2 = 0, m4 = 0, ex = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        w += q.weights[i];
        m2 += q.weights[i] * q.nodes[i] * q.nodes[i];
        m4 += q.weights[i] * std::pow(q.nodes[i], 4);
        ex += q.weights[i] * std::exp(q.nodes[i]);
    }
    CHECK(w == doctest::Approx(1).epsilon(1e-14));
    CHECK(m2 == doctest::Approx(1).epsilon(1e-13));
    CHECK(m4 == doctest::Approx(3).epsilon(1e-12));
    CHECK(ex == doctest::Approx(std::exp(0.5)).epsilon(1e-12));
}

TEST_CASE("gauss-legendre on [-1,1]")
{
    const auto& q = gauss_legendre(16);
    double s = 0, x4 = 0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        s += q.weights[i];
        x4 += q.weights[i] * std::pow(q.nodes[i], 4);
    }
    CHECK(s == doctest::Approx(2).epsilon(1e-14));
    CHECK(x4 == doctest::Approx(0.4).epsilon(1e-13));
}

TEST_CASE("monotone cubic keeps monotone data monotone")
{
    std::vector<double> y{0, 0, 0, 1, 1, 1, 5};
    MonotoneCubic f(0.0, 1.0, y);
    double prev = -1;
    for (double x = 0; x <= 6; x += 0.01) {
        const double v = f(x);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
    CHECK(f(3.0) == 1.0);
    // linear beyond the ends
    CHECK(f(-1.0) == doctest::Approx(0.0));
}

TEST_CASE("hermite table reproduces cubics")
{
    std::vector<double> x{-1, 0, 0.5, 2}, y, dy;
    for (double v : x) {
        y.push_back(v * v * v);
        dy.push_back(3 * v * v);
    }
    HermiteTable h(x, y, dy);
    for (double v : {-0.7, 0.2, 1.3}) CHECK(h(v) == doctest::Approx(v * v * v).epsilon(1e-12));
}

TEST_CASE("helpers")
{
    CHECK(ln_e_plus(0) == doctest::Approx(1.0));
    CHECK(pos(-2) == 0);
    CHECK(neg(-2) == 2);
    CHECK(normal_cdf(0) == doctest::Approx(0.5));
    CHECK(log_add(std::log(2.0), std::log(3.0)) == doctest::Approx(std::log(5.0)));
}

TEST_CASE("parallel blocks reduce identically for any worker count")
{
    std::vector<double> v(10007);
    std::iota(v.begin(), v.end(), 0.5);
    auto run = [&](unsigned w) {
        set_workers(w);
        std::vector<double> part((v.size() + 255) / 256);
        parallel_blocks(v.size(), 256, [&](std::size_t a, std::size_t b, std::size_t k) {
            double s = 0;
            for (std::size_t i = a; i < b; ++i) s += std::sin(v[i]);
            part[k] = s;
        });
        return std::accumulate(part.begin(), part.end(), 0.0);
    };
    const double one = run(1);
    CHECK(run(4) == one);
    CHECK(run(7) == one);
    set_workers(1);
}

TEST_CASE("stream engines are deterministic and distinct")
{
    auto a = stream_engine(1, 0), b = stream_engine(1, 0), c = stream_engine(1, 1);
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
}
