#include "doctest.h"

#include "bsdelab/generator.hpp"

#include <cmath>

using namespace bsdelab;

TEST_CASE("catalog evaluations")
{
    CHECK(make_generator("quadratic-half")(0, 0, 2.0) == 2.0);
    CHECK(make_generator("sqrt-abs-y")(0, 4, 0.0) == 2.0);
    const auto zero = make_generator("zero");
    CHECK(zero(0.3, -7, 11.0) == 0.0);
    CHECK(make_generator("neg-2-sqrt-y-plus")(0, 4, 0.0) == -4.0);
    CHECK(make_generator("neg-2-sqrt-y-plus")(0, -4, 0.0) == 0.0);
    CHECK(make_generator("abs-z", {{"gamma", 2.0}})(0, 0, -3.0) == 6.0);
    std::vector<double> z2{3, 4};
    CHECK(make_generator("z1sq-minus-z2sq")(0, 0, z2) == -7.0);
    CHECK(make_generator("half-z1-sq")(0, 0, z2) == 4.5);
    CHECK(make_generator("log-z", {{"c", 1.0}, {"lambda", 0.0}})(0, 0, 2.0) == 2.0);
}

TEST_CASE("every catalog tag is admitted with defaults and is pure")
{
    for (const auto& tag : catalog_tags()) {
        CAPTURE(tag);
        const auto g = make_generator(tag);
        CHECK(g.growth().has_value());
        std::vector<double> z(g.dim(), 0.7);
        const double a = g(0.2, -1.3, z), b = g(0.2, -1.3, z);
        CHECK(std::isfinite(a));
        CHECK(a == b);
    }
}

TEST_CASE("catalog rejects bad input")
{
    CHECK_THROWS_AS(make_generator("no-such-thing"), ValidationError);
    CHECK_THROWS_AS(make_generator("abs-z", {{"gamma", -1.0}}), ValidationError);
    CHECK_THROWS_AS(make_generator("abs-z", {{"beta", 1.0}}), ValidationError);
    CHECK_THROWS_AS(make_generator("legendre-of", {{"alpha_star", 1.5}}), ValidationError);
}

TEST_CASE("growth spec invariants")
{
    CHECK_THROWS_AS(GrowthSpec(0.5, 1, 1), ValidationError);
    CHECK_THROWS_AS(GrowthSpec(2.5, 1, 1), ValidationError);
    CHECK_THROWS_AS(GrowthSpec(1, -1, 1), ValidationError);
    CHECK_THROWS_AS(GrowthSpec(1, 1, 0), ValidationError);
    CHECK_THROWS_AS(GrowthSpec(1, 1, 1, 1.5), ValidationError);
    CHECK(GrowthSpec(1, 1, 1).conjugate_infinite());
    CHECK(std::isinf(GrowthSpec(1, 1, 1).conjugate()));
    CHECK(GrowthSpec(2, 0, 1).conjugate() == 2.0);
    CHECK(GrowthSpec(1.5, 0, 1).conjugate() == doctest::Approx(3.0));
    CHECK(GrowthSpec(1, 1, 1, 0.3, 0.1).derived_p() == doctest::Approx(0.6));
    CHECK(GrowthSpec(1, 1, 1, 0.9, 0.1).derived_p() == doctest::Approx(0.9));
    CHECK(GrowthSpec(1, 1, 1, 0, 0.7).derived_p() == doctest::Approx(1.4));
}

TEST_CASE("truncation")
{
    const auto c5 = make_generator("constant", {{"value", 5.0}});
    CHECK(truncate(c5, 3, 7)(0, 0, 0.0) == 3.0);
    const auto cm5 = make_generator("constant", {{"value", -5.0}});
    CHECK(truncate(cm5, 3, 2)(0, 0, 0.0) == -2.0);
    CHECK(truncate(make_generator("quadratic-half"), 1, 1)(0, 0, 2.0) == 1.0);
    CHECK_THROWS_AS(truncate(c5, 0.5, 1), ValidationError);
}

TEST_CASE("growth audit")
{
    const auto grid = AuditGrid::standard();
    const auto q = check_growth(make_generator("quadratic-half"), GrowthSpec(2, 0, 0.5), grid);
    CHECK(q.passed);
    CHECK(q.max_violation <= 0);

    const auto lin = check_growth(make_generator("abs-z", {{"gamma", 1.0}}), GrowthSpec(1, 0, 0.5), grid);
    CHECK_FALSE(lin.passed);
    CHECK(std::abs(lin.witness_z.at(0)) >= 1e3);

    const auto ex31 = check_growth(make_generator("neg-2-sqrt-y-plus"), GrowthSpec(1, 1, 1, 0, 0, TimeFunction(1.0)), grid);
    CHECK(ex31.passed);
}

TEST_CASE("domination is audited where declared")
{
    const auto r = check_growth(make_generator("quadratic-half"), GrowthSpec(2, 0, 0.5), AuditGrid::standard());
    CHECK(r.domination_checked);
    CHECK(r.domination_passed);
}

TEST_CASE("composite expressions")
{
    using namespace expr;
    const auto g = composite("lin", constant(1) + 2.0 * y() + abs(z(0)), 1, GrowthSpec(1, 2, 1, 0, 0, TimeFunction(1.0)));
    CHECK(g(0, 1.5, -2.0) == 6.0);
    CHECK_THROWS_AS(composite("bad", y() * y(), 1, GrowthSpec(1, 1, 1)), ValidationError);
}

TEST_CASE("time functions")
{
    TimeFunction f({0.5}, {1.0, 3.0});
    CHECK(f(0.25) == 1.0);
    CHECK(f(0.5) == 3.0);
    CHECK(f.integral(0, 1) == doctest::Approx(2.0));
    CHECK(f.sup() == 3.0);
}

TEST_CASE("modulus audit")
{
    ModulusSpec ok{[](double u) { return std::sqrt(u); }, [](double u) { return u; }, 1.0};
    CHECK(ok.audit());
    ModulusSpec bad{[](double u) { return u * u; }, [](double u) { return u; }, 1.0};
    std::string why;
    CHECK_FALSE(bad.audit(&why));
    CHECK_FALSE(why.empty());
}
