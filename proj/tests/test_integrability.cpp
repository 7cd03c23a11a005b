#include "doctest.h"

#include "bsdelab/integrability.hpp"

#include <cmath>

using namespace bsdelab;

namespace {

TerminalSpec ex21()
{
    auto xi = [](double b) { return std::expm1(0.5 * (std::abs(b) - 1) * (std::abs(b) - 1)); };
    auto lxi = [](double b) {
        const double v = 0.5 * (std::abs(b) - 1) * (std::abs(b) - 1);
        return v == 0 ? -INFINITY : v + std::log(-std::expm1(-v));
    };
    return TerminalSpec::of_brownian(xi, 1.0, lxi);
}

} // namespace

TEST_CASE("young weights")
{
    CHECK(young_value(YoungSpace::lp(2), 3) == doctest::Approx(9));
    CHECK(young_value(YoungSpace::llogl(1), 0) == 0);
    CHECK(young_value(YoungSpace::exp_pow(1, 1), 2) == doctest::Approx(std::exp(2.0)));
    CHECK(log_young_value(YoungSpace::exp_pow(1, 1), std::log(1e6)) == doctest::Approx(1e6));
    CHECK_THROWS_AS(young_value(YoungSpace::lp(1), -1), ValidationError);
}

TEST_CASE("young weights are nondecreasing")
{
    for (const auto& s : {YoungSpace::lp(1.5), YoungSpace::llogl(2), YoungSpace::lexp_log(1, 0.5),
                          YoungSpace::exp_pow(0.5, 2)}) {
        double prev = young_value(s, 0);
        CHECK(prev >= 0);
        for (double x = 0.01; x < 20; x *= 1.3) {
            const double v = young_value(s, x);
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("example terminal: divergent weighted moment, finite log-exp moment")
{
    const auto t = ex21();
    auto weighted = TerminalSpec::of_brownian([t](double b) { return t(b) * std::exp(std::abs(b)); }, 1.0,
                                              [t](double b) { return t.log_abs(b) + std::abs(b); });
    CHECK(classify_membership(weighted, YoungSpace::lp(1)).verdict == Membership::Divergent);
    const auto f = classify_membership(t, YoungSpace::lexp_log(1, 0.5));
    CHECK(f.verdict == Membership::Finite);
    CHECK(std::isfinite(f.value_or_rate));
}

TEST_CASE("constants are in every space")
{
    const auto c = classify_membership(TerminalSpec::constant(5), YoungSpace::exp_pow(1, 2));
    CHECK(c.verdict == Membership::Finite);
    CHECK(c.value_or_rate == doctest::Approx(std::exp(25.0)));
}

TEST_CASE("inclusion chain on catalog terminals")
{
    const std::vector<TerminalSpec> terms{TerminalSpec::of_brownian([](double b) { return b * b; }, 1.0),
                                          TerminalSpec::of_brownian([](double b) { return std::exp(b); }, 1.0), ex21()};
    for (const auto& t : terms) {
        for (double q : {0.5, 1.0}) {
            const auto hi = classify_membership(t, YoungSpace::lexp_log(1.2, q));
            if (hi.verdict != Membership::Finite) continue;
            const auto lo = classify_membership(t, YoungSpace::lexp_log(1.0, 0.5 * q));
            CHECK(lo.verdict == Membership::Finite);
        }
    }
}

TEST_CASE("samples report their empirical moment without a verdict")
{
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i % 7);
    const auto r = classify_membership(TerminalSpec::samples(v), YoungSpace::lp(2));
    double m = 0;
    for (double x : v) m += x * x;
    // a finite sample certifies nothing; the value is the sample moment
    CHECK(r.verdict == Membership::Inconclusive);
    CHECK(r.value_or_rate == doctest::Approx(m / 1000));
}

TEST_CASE("space validation")
{
    CHECK_THROWS_AS(YoungSpace::lp(0).validate(), ValidationError);
    CHECK_NOTHROW(YoungSpace::linf().validate());
}
