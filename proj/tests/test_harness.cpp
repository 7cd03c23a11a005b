#include "doctest.h"

#include "bsdelab/harness.hpp"

#include <cmath>

using namespace bsdelab;

TEST_CASE("submartingale: zero generator with the power family")
{
    const auto g = make_generator("zero");
    const auto phi = make_phi(PhiFamily::Power, *g.growth(), 2.0).phi;
    const auto bm = MarkovModel::brownian();
    const auto sol = solve_markov_grid(g, [](double x) { return x; }, bm, TimeGrid(1, 100));
    CHECK(submartingale_check(sol, g, phi, &bm).passed());

    auto P = std::make_shared<const PathBundle>(simulate_paths(1, TimeGrid(1, 20), 20000, 3));
    const auto l = solve_lsmc(g, terminal_values(*P, [](auto s) { return s[0]; }), P);
    SubmartingaleOptions o;
    o.stride = 5;
    CHECK(submartingale_check(l, g, phi, nullptr, o).passed());
}

TEST_CASE("submartingale: linear generator, exp-log-power, adversarial shift")
{
    const auto g = make_generator("linear", {{"f", 1.0}, {"beta", 1.0}, {"gamma", 1.0}});
    const auto phi = make_phi(PhiFamily::ExpLogPower, *g.growth()).phi;
    const auto bm = MarkovModel::brownian();
    const auto sol = solve_markov_grid(g, [](double x) { return x; }, bm, TimeGrid(1, 200));
    CHECK(submartingale_check(sol, g, phi, &bm).passed());
    SubmartingaleOptions adv;
    adv.y_transform = [](double t, double y) { return y + 10 * t; };
    CHECK_FALSE(submartingale_check(sol, g, phi, &bm, adv).passed());
}

TEST_CASE("submartingale refuses a phi that does not verify")
{
    const auto g = make_generator("linear", {{"beta", 1.0}, {"gamma", 1.0}});
    PhiParams q;
    q.p = 2;
    q.c = 0;
    const auto bm = MarkovModel::brownian();
    const auto sol = solve_markov_grid(g, [](double x) { return x; }, bm, TimeGrid(1, 20));
    CHECK_THROWS_AS(submartingale_check(sol, g, PhiSpec(PhiFamily::Power, q), &bm), ValidationError);
}

TEST_CASE("comparison: linear cash shift")
{
    const auto g = make_generator("linear", {{"beta", 1.0}, {"gamma", 1.0}});
    const auto bm = MarkovModel::brownian();
    const TimeGrid grid(1, 200);
    const auto a = solve_markov_grid(g, [](double x) { return x; }, bm, grid);
    const auto b = solve_markov_grid(g, [](double x) { return x + 1; }, bm, grid);
    ComparisonOptions o;
    o.gen_a = o.gen_b = g;
    const auto r = comparison_check(a, b, o);
    CHECK(r.report.passed());
    CHECK(r.worst_margin <= 0);
    for (std::size_t i : {0u, 100u, 200u})
        CHECK(b.y[i][200] - a.y[i][200] == doctest::Approx(std::exp(grid.T - grid.t(i))).epsilon(1e-2));
    for (const auto& d : r.diagnostics) CHECK(d.reconstruction_error <= 1e-12);
}

TEST_CASE("comparison: quadratic pair with Cole-Hopf reference")
{
    const auto q = make_generator("quadratic-half");
    const auto bm = MarkovModel::brownian();
    const TimeGrid grid(1, 200);
    const auto a = solve_markov_grid(q, [](double x) { return std::min(x, 1.0); }, bm, grid);
    const auto b = solve_markov_grid(q, [](double x) { return pos(x); }, bm, grid);
    ComparisonOptions o;
    o.regime = ComparisonRegime::Quadratic;
    o.gen_a = o.gen_b = q;
    const auto r = comparison_check(a, b, o);
    CHECK(r.report.passed());
    CHECK(a.y0 <= b.y0);
    CHECK(b.y0 == doctest::Approx(*b.diag.cole_hopf_reference).epsilon(1e-2));
    CHECK(r.diagnostics.size() == 3);
    for (const auto& d : r.diagnostics) {
        CHECK(d.reconstruction_error <= 1e-12);
        CHECK(d.scaled_envelope == doctest::Approx((1 - d.theta) * d.envelope));
    }
}

TEST_CASE("comparison preconditions are enforced")
{
    const auto g = make_generator("zero");
    const auto bm = MarkovModel::brownian();
    const TimeGrid grid(1, 20);
    const auto a = solve_markov_grid(g, [](double x) { return x + 1; }, bm, grid);
    const auto b = solve_markov_grid(g, [](double x) { return x; }, bm, grid);
    CHECK_THROWS_AS(comparison_check(a, b), ValidationError);
    ComparisonOptions o;
    o.gen_a = make_generator("constant", {{"value", 1.0}});
    o.gen_b = g;
    const auto c = solve_markov_grid(*o.gen_a, [](double x) { return x; }, bm, grid);
    const auto d = solve_markov_grid(g, [](double x) { return x + 1e-9; }, bm, grid);
    CHECK_THROWS_AS(comparison_check(c, d, o), ValidationError);
}

TEST_CASE("counterexample suite")
{
    ScenarioOptions o;
    o.paths = 20000;
    for (const auto& tag : counterexample_tags()) {
        CAPTURE(tag);
        const auto r = counterexample_suite(tag, o);
        for (const auto& c : r.checks) {
            CAPTURE(c.name);
            CAPTURE(c.value);
            CHECK(c.passed);
        }
    }
    CHECK_THROWS_AS(counterexample_suite("ex9.9"), ValidationError);
}

TEST_CASE("report json")
{
    Report r;
    r.name = "x";
    r.check("nan value", true, NAN, 1.0);
    const auto j = r.to_json();
    CHECK(j["passed"] == true);
    CHECK(j["assertions"][0]["value"] == "nan");
    r.check("fails", false, 2, 1);
    CHECK_FALSE(r.passed());
    r.exploratory = true;
    CHECK(r.passed());
    CHECK(r.to_json()["tag"] == "exploratory - no theoretical claim");
}
