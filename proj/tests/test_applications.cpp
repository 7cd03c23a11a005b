#include "doctest.h"

#include "bsdelab/applications.hpp"

#include <cmath>

using namespace bsdelab;

TEST_CASE("measure change weights have unit mean")
{
    const auto P = simulate_paths(1, TimeGrid(1, 10), 100000, 4);
    const auto w = MeasureChangeSpec::constant({1.0}).weights(P);
    double m = 0, mb = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        m += w[i];
        mb += w[i] * P.brownian(10, 0)[i];
    }
    CHECK(std::abs(m / 1e5 - 1) <= 2e-2);
    // E_q[B_1] = q T
    CHECK(std::abs(mb / 1e5 - 1) <= 5e-2);
    MeasureChangeSpec two{{0.5}, {{1.0}, {-2.0}}};
    CHECK(two.at(0.2)[0] == 1.0);
    CHECK(two.at(0.7)[0] == -2.0);
    CHECK(two.max_norm() == 2.0);
}

TEST_CASE("legendre transforms")
{
    const auto zg = legendre_default_grid();
    CHECK(zg.size() == 401);
    const auto quad = PenaltySpec::custom("half-square", [](double x) { return 0.5 * x * x; }, 0.5);
    const auto g = legendre_generator(quad, zg);
    for (double z : zg) CHECK(std::abs(g(0, 0, z) + 0.5 * z * z) <= 1e-8);
    CHECK(std::abs(g(0, 0, 0.123) + 0.5 * 0.123 * 0.123) <= 1e-8);
    const auto gp = legendre_generator(PenaltySpec::power(0.5, 2), zg);
    for (double z : zg) CHECK(std::abs(gp(0, 0, z) - legendre_power_closed_form(0.5, 2, z)) <= 1e-8);
    const auto heavy = legendre_generator(PenaltySpec::custom("heavy", [](double x) { return 1e6 * x * x; }, 1e6), zg);
    CHECK(std::abs(heavy(0, 0, 0.05)) <= 1e-8);
    CHECK(legendre_value(quad, 2.0).argmin == doctest::Approx(-2.0).epsilon(1e-6));
    CHECK_THROWS_AS(legendre_value(PenaltySpec::custom("lin", [](double x) { return x; }), 2.0), ValidationError);
    std::vector<double> xs{-1, -0.3, 0, 0.8, 2};
    CHECK(double_conjugate_error(quad, g, xs) <= 1e-6);
}

TEST_CASE("penalty audit")
{
    CHECK_NOTHROW(PenaltySpec::power(1, 3).audit());
    const auto concave = PenaltySpec::custom("concave", [](double x) { return -x * x; });
    CHECK_THROWS_AS(concave.audit(), ValidationError);
    const auto shifted = PenaltySpec::custom("shifted", [](double x) { return x * x + 1; });
    CHECK_THROWS_AS(shifted.audit(), ValidationError);
}

TEST_CASE("g-expectation basics")
{
    const auto bm = MarkovModel::brownian();
    const TimeGrid grid(1, 200);
    CHECK(std::abs(g_expectation(make_generator("zero"), [](double x) { return x * x; }, bm, grid).y0 - 1) <= 1e-3);
    const auto az = make_generator("abs-z", {{"gamma", 1.0}});
    CHECK(std::abs(g_expectation(az, [](double x) { return x; }, bm, grid).y0 - 1) <= 2e-2);
    CHECK(g_expectation(az, [](double) { return 2.5; }, bm, grid).y0 == doctest::Approx(2.5).epsilon(1e-12));
    CHECK_THROWS_AS(audit_zero_at_origin(make_generator("constant", {{"value", 1.0}})), ValidationError);
    CHECK_THROWS_AS(g_expectation(make_generator("linear", {{"f", 0.5}}), [](double x) { return x; }, bm, grid),
                    ValidationError);
}

TEST_CASE("g-expectation axioms for the abs-z generator")
{
    AxiomOptions o;
    o.paths = 40000;
    const auto r = gexp_axiom_suite(make_generator("abs-z", {{"gamma", 1.0}}), o);
    for (const auto& c : r.checks) {
        CAPTURE(c.name);
        CAPTURE(c.value);
        CHECK(c.passed);
    }
}

TEST_CASE("robust representation")
{
    RobustOptions o;
    o.paths = 40000;
    const auto r = robust_bound(PenaltySpec::custom("half-square", [](double x) { return 0.5 * x * x; }, 0.5), o);
    for (const auto& c : r.checks) {
        CAPTURE(c.name);
        CAPTURE(c.value);
        CHECK(c.passed);
    }
}

TEST_CASE("risk measures from the log-z family")
{
    const auto g0 = make_generator("log-z", {{"c", 1.0}, {"lambda", 0.0}});
    const double rho = risk_rho(g0, [](double x) { return x; });
    CHECK(std::abs(rho - 1) <= 2e-2);
    CHECK(risk_rho(g0, [](double x) { return x + 0.7; }) == doctest::Approx(rho - 0.7).epsilon(1e-9));
    CHECK(std::abs(risk_rho(g0, [](double x) { return 2 * x; }) - 2 * rho) <= 2e-2);
    for (double lam : {-0.5, 0.0, 0.5}) {
        CAPTURE(lam);
        const auto r = risk_measure_eval(make_generator("log-z", {{"c", 1.0}, {"lambda", lam}}), [](double x) { return x; });
        CHECK(r.passed());
    }
    CHECK_THROWS_AS(risk_measure_eval(make_generator("abs-z"), [](double x) { return x; }), ValidationError);
}
