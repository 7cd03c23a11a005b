#include "doctest.h"

#include "bsdelab/test_function.hpp"

#include <cmath>

using namespace bsdelab;

TEST_CASE("thresholds")
{
    const auto pw = phi_thresholds(PhiFamily::Power, GrowthSpec(1, 1, 1), 2.0);
    CHECK(pw.c == doctest::Approx(4.0));
    const auto el = phi_thresholds(PhiFamily::ExpLinear, GrowthSpec(2, 0, 1), std::nullopt);
    CHECK(el.c1 == doctest::Approx(2.0));
    CHECK(el.c2 == doctest::Approx(0.0));
    const auto lp = phi_thresholds(PhiFamily::LogPower, GrowthSpec(1, 1e-300, 1, 0, -0.5), 4.0);
    CHECK(lp.c == doctest::Approx(1.0));
    CHECK_THROWS_AS(phi_thresholds(PhiFamily::Power, GrowthSpec(2, 1, 1), 2.0), ValidationError);
    CHECK_THROWS_AS(phi_thresholds(PhiFamily::LogDeficit, GrowthSpec(1, 1, 1, 0, -0.2), std::nullopt),
                    ValidationError);
}

TEST_CASE("exp-log-power: corrected sign verifies, printed sign does not")
{
    MakePhiOptions printed;
    printed.printed_exp_log_power_sign = true;
    auto fails = [&](const GrowthSpec& g) {
        try {
            return !make_phi(PhiFamily::ExpLogPower, g, std::nullopt, printed).report.passed;
        } catch (const Error&) {
            return true;
        }
    };
    // gamma^2 outweighs (p+1) beta: the printed c2 is negative and phi_s < 0
    const GrowthSpec a(1, 0, 1, 0, 0);
    CHECK(make_phi(PhiFamily::ExpLogPower, a).report.passed);
    CHECK(phi_thresholds(PhiFamily::ExpLogPower, a, std::nullopt, printed).c2 == doctest::Approx(-1.0));
    CHECK(fails(a));
    // printed c2 = 0 keeps membership but the inequality fails at large x
    const GrowthSpec b(1, 1, 1, 0, 0.5);
    CHECK(make_phi(PhiFamily::ExpLogPower, b).report.passed);
    CHECK(phi_thresholds(PhiFamily::ExpLogPower, b, std::nullopt, printed).c2 == doctest::Approx(0.0));
    CHECK(fails(b));
}

TEST_CASE("power family at threshold and at c = 0")
{
    const auto b = make_phi(PhiFamily::Power, GrowthSpec(1, 1, 1), 2.0);
    CHECK(b.report.passed);
    PhiParams q;
    q.p = 2;
    q.c = 0;
    const auto rep = verify_inequality(PhiSpec(PhiFamily::Power, q), GrowthSpec(1, 1, 1), VerifyGrid::standard());
    CHECK_FALSE(rep.passed);
    CHECK(rep.min_slack < 0);
    // at xbar = 0 only -beta phi_x (k+x) is left, negative at any x
    CHECK(inequality_lhs(PhiSpec(PhiFamily::Power, q), GrowthSpec(1, 1, 1), 0.5, 1.0, 0.0) < 0);
}

TEST_CASE("all six families at threshold")
{
    struct C {
        PhiFamily f;
        GrowthSpec g;
        std::optional<double> p;
    };
    for (const C& c : {C{PhiFamily::LogDeficit, GrowthSpec(1, 1, 1, 0, -1), std::nullopt},
                       C{PhiFamily::LogPower, GrowthSpec(1, 1, 1, 0, -0.5), 1.0},
                       C{PhiFamily::ExpLogPower, GrowthSpec(1, 1, 1, 0, 0), std::nullopt},
                       C{PhiFamily::Power, GrowthSpec(1, 1, 1), 2.0},
                       C{PhiFamily::ExpLinear, GrowthSpec(2, 1, 1), std::nullopt},
                       C{PhiFamily::ExpPower, GrowthSpec(1.5, 1, 1), std::nullopt}}) {
        CAPTURE(family_name(c.f));
        const auto b = make_phi(c.f, c.g, c.p);
        CHECK(b.report.passed);
        // exp-linear sits exactly at zero slack
        CHECK(b.report.min_slack >= -1e-15);
    }
}

TEST_CASE("membership rejects linear phi")
{
    PhiParams q;
    q.p = 1;
    q.c = 0;
    CHECK_THROWS_AS(PhiSpec(PhiFamily::Power, q), ValidationError);
}

TEST_CASE("closed-form derivatives match differences")
{
    PhiParams q;
    q.p = 3;
    q.c = 2;
    q.k = 5;
    const PhiSpec phi(PhiFamily::Power, q);
    for (double x : {0.0, 0.5, 3.0, 40.0}) {
        const double h = 1e-5 * (1 + x);
        const double fd = (phi.value(0.3, x + h) - phi.value(0.3, x - h)) / (2 * h);
        CHECK(phi.dx(0.3, x) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("log lemma")
{
    const auto a = find_min_k(0, 2);
    CHECK(a.holds);
    CHECK(a.k == doctest::Approx(kE));
    CHECK(find_min_k(0, 1).holds);
    const auto w = find_min_k(1, 1);
    CHECK_FALSE(w.holds);
    CHECK(w.violation > 0);
    CHECK(std::isinf(w.sufficient_k));
    CHECK(log_lemma_gap(1, 1, w.k, w.violation_x, w.violation_y) > 0);
    for (double lam : {-1.0, -0.5, 0.5, 1.0}) {
        CAPTURE(lam);
        const auto r = find_min_k(lam, 2);
        CHECK(r.holds);
        CHECK(std::isfinite(r.k));
        CHECK(r.sufficient_k >= r.k);
        CHECK(appendix_conditions(lam, 2, r.sufficient_k));
    }
}

TEST_CASE("names round trip")
{
    for (auto f : {PhiFamily::LogDeficit, PhiFamily::LogPower, PhiFamily::ExpLogPower, PhiFamily::Power,
                   PhiFamily::ExpLinear, PhiFamily::ExpPower})
        CHECK(parse_family(family_name(f)) == f);
    CHECK_THROWS_AS(parse_family("nope"), ValidationError);
}
