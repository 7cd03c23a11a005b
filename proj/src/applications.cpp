#include "bsdelab/applications.hpp"

#include "bsdelab/interpolation.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/simd.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace bsdelab {

namespace {
std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}
} // namespace

// ---------------------------------------------------------------- measure change

MeasureChangeSpec MeasureChangeSpec::constant(std::vector<double> q) { return {{}, {std::move(q)}}; }

const std::vector<double>& MeasureChangeSpec::at(double t) const
{
    const auto k = std::size_t(std::upper_bound(breaks.begin(), breaks.end(), t) - breaks.begin());
    return q.at(k);
}

double MeasureChangeSpec::max_norm() const
{
    double m = 0;
    for (const auto& v : q) {
        double s = 0;
        for (double c : v) s += c * c;
        m = std::max(m, std::sqrt(s));
    }
    return m;
}

std::vector<double> MeasureChangeSpec::weights(const PathBundle& P) const
{
    if (q.size() != breaks.size() + 1) throw ValidationError("MeasureChangeSpec: need one drift per interval");
    for (const auto& v : q)
        if (v.size() != P.d()) throw ValidationError("MeasureChangeSpec: drift dimension differs from the paths");
    const std::size_t M = P.M();
    std::vector<double> lw(M, 0.0), db(M);
    const double dt = P.grid().dt();
    for (std::size_t i = 0; i < P.grid().N; ++i) {
        const auto& qi = at(P.grid().t(i));
        double q2 = 0;
        for (std::size_t k = 0; k < P.d(); ++k) {
            q2 += qi[k] * qi[k];
            if (qi[k] == 0.0) continue;
            P.increments(i, k, db);
            simd::axpy(qi[k], db, lw, lw);
        }
        for (double& v : lw) v -= 0.5 * q2 * dt;
    }
    for (double& v : lw) v = std::exp(v);
    return lw;
}

// ---------------------------------------------------------------- penalties and conjugates

PenaltySpec PenaltySpec::power(double c, double as)
{
    if (!(c > 0)) throw ValidationError("power penalty: c must be positive");
    if (!(as > 1)) throw ValidationError("power penalty: exponent must exceed 1");
    PenaltySpec p;
    p.name = "power";
    p.f = [c, as](double x) { return c * std::pow(std::abs(x), as); };
    p.power_c = c;
    p.power_exponent = as;
    p.quad_coercivity = as >= 2 ? c : 0.0;
    return p;
}

PenaltySpec PenaltySpec::custom(std::string name, std::function<double(double)> f, double a, double b)
{
    PenaltySpec p;
    p.name = std::move(name);
    p.f = std::move(f);
    p.quad_coercivity = a;
    p.offset = b;
    return p;
}

void PenaltySpec::audit(std::uint64_t seed) const
{
    if (!f) throw ValidationError("penalty " + name + " has no function");
    if (f(0.0) != 0.0) throw ValidationError("penalty " + name + ": f(0) = " + fmt(f(0.0)) + ", must be 0");
    auto eng = stream_engine(seed, 0);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int k = 0; k < 2000; ++k) {
        const double a = u(eng), b = u(eng);
        const double fm = f(0.5 * (a + b)), avg = 0.5 * (f(a) + f(b));
        if (f(a) < 0) throw ValidationError("penalty " + name + " is negative at " + fmt(a));
        if (fm > avg + 1e-9 * (1 + std::abs(avg)))
            throw ValidationError("penalty " + name + " fails midpoint convexity on [" + fmt(a) + ", " + fmt(b) + "]");
    }
}

LegendrePoint legendre_value(const PenaltySpec& pen, double z)
{
    auto F = [&](double x) { return z * x + pen.f(x); };
    // bracket a minimum of the convex objective
    double s = 1.0;
    double a, b, c;
    const double f0 = F(0.0);
    const double fl = F(-s), fr = F(s);
    if (f0 <= fl && f0 <= fr) {
        a = -s;
        b = 0.0;
        c = s;
    } else {
        const double dir = fl < fr ? -1.0 : 1.0;
        double xp = 0.0, fp = f0, x = dir * s, fx = dir < 0 ? fl : fr;
        while (true) {
            const double xn = xp == 0.0 && x == dir * s ? dir * 2 * s : x + 2 * (x - xp);
            const double fn = F(xn);
            if (!std::isfinite(fn) || std::abs(xn) > 1e12)
                throw ValidationError("legendre: inf_x (z x + f(x)) is unbounded below at z=" + fmt(z) +
                                      " (penalty " + pen.name + " not coercive)");
            if (fn >= fx) {
                a = std::min(xp, xn);
                c = std::max(xp, xn);
                b = x;
                break;
            }
            xp = x;
            fp = fx;
            x = xn;
            fx = fn;
        }
        (void)fp;
    }
    // golden section on [a, c]
    const double r = 0.5 * (3.0 - std::sqrt(5.0));
    double x1 = a + r * (c - a), x2 = c - r * (c - a);
    double f1 = F(x1), f2 = F(x2);
    for (int it = 0; it < 300 && c - a > 1e-15 * (1 + std::abs(b)); ++it) {
        if (f1 <= f2) {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + r * (c - a);
            f1 = F(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = c - r * (c - a);
            f2 = F(x2);
        }
    }
    double xm = f1 <= f2 ? x1 : x2;
    double fm = std::min(f1, f2);
    if (f0 < fm) {
        xm = 0.0;
        fm = f0;
    }
    return {fm, xm};
}

double legendre_power_closed_form(double c, double as, double z)
{
    const double al = as / (as - 1);
    return -(1.0 / std::pow(c, al - 1)) * ((as - 1) / std::pow(as, al)) * std::pow(std::abs(z), al);
}

std::vector<double> legendre_default_grid()
{
    std::vector<double> z(401);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = -10.0 + 0.05 * double(k);
    z[200] = 0.0;
    return z;
}

Generator legendre_generator(const PenaltySpec& pen, const std::vector<double>& zgrid)
{
    pen.audit();
    if (zgrid.size() < 3 || !std::is_sorted(zgrid.begin(), zgrid.end()))
        throw ValidationError("legendre_generator: z grid must be sorted with at least 3 nodes");
    std::vector<double> g(zgrid.size()), dg(zgrid.size());
    for (std::size_t k = 0; k < zgrid.size(); ++k) {
        const auto lp = legendre_value(pen, zgrid[k]);
        g[k] = lp.value;
        dg[k] = lp.argmin;
    }
    for (std::size_t k = 0; k < zgrid.size(); ++k) {
        if (g[k] > 1e-12) throw ValidationError("legendre_generator: g > 0 at z=" + fmt(zgrid[k]));
        if (zgrid[k] == 0.0 && std::abs(g[k]) > 1e-12) throw ValidationError("legendre_generator: g(0) != 0");
        for (std::size_t m = k + 2; m < zgrid.size(); m += 2) {
            const std::size_t mid = (k + m) / 2;
            if (zgrid[mid] != 0.5 * (zgrid[k] + zgrid[m])) continue;
            if (g[mid] < 0.5 * (g[k] + g[m]) - 1e-9 * (1 + std::abs(g[mid])))
                throw ValidationError("legendre_generator: concavity fails at z=" + fmt(zgrid[mid]));
        }
    }
    auto table = std::make_shared<HermiteTable>(zgrid, g, dg);
    std::optional<GrowthSpec> growth;
    if (pen.power_exponent >= 2) {
        // alpha in (1, 2]; table interpolation error is absorbed by a tiny f
        const double al = pen.power_exponent / (pen.power_exponent - 1);
        const double gam = -legendre_power_closed_form(pen.power_c, pen.power_exponent, 1.0);
        growth.emplace(al, 0.0, gam, 0.0, 0.0, TimeFunction(1e-9));
    } else if (pen.quad_coercivity > 0) {
        growth.emplace(2.0, 0.0, 1.0 / (4 * pen.quad_coercivity), 0.0, 0.0, TimeFunction(pen.offset + 1e-9));
    }
    Regularity r;
    r.concave = true;
    Params params{{"grid_nodes", double(zgrid.size())}};
    if (pen.power_exponent > 1) {
        params["c"] = pen.power_c;
        params["alpha_star"] = pen.power_exponent;
    }
    const double zlo = zgrid.front(), zhi = zgrid.back();
    return Generator(
        "legendre-of", [pen, table, zlo, zhi](double, double, double, std::span<const double> z) {
            const double v = z[0];
            if (v >= zlo && v <= zhi) return (*table)(v);
            return legendre_value(pen, v).value;
        },
        1, params, growth, r);
}

double double_conjugate_error(const PenaltySpec& pen, const Generator& g, const std::vector<double>& xs)
{
    double worst = 0;
    for (double x : xs) {
        // maximize the concave map w -> x w + g(-w) by golden section around f'(x)
        auto H = [&](double w) { return x * w + g(0.0, 0.0, -w); };
        double a = -9.5, c = 9.5;
        const double r = 0.5 * (3.0 - std::sqrt(5.0));
        double x1 = a + r * (c - a), x2 = c - r * (c - a);
        double h1 = H(x1), h2 = H(x2);
        for (int it = 0; it < 200 && c - a > 1e-13; ++it) {
            if (h1 >= h2) {
                c = x2;
                x2 = x1;
                h2 = h1;
                x1 = a + r * (c - a);
                h1 = H(x1);
            } else {
                a = x1;
                x1 = x2;
                h1 = h2;
                x2 = c - r * (c - a);
                h2 = H(x2);
            }
        }
        worst = std::max(worst, std::abs(std::max(h1, h2) - pen.f(x)));
    }
    return worst;
}

// ---------------------------------------------------------------- g-expectation

void audit_zero_at_origin(const Generator& gen, double T)
{
    const auto grid = AuditGrid::standard(gen.dim(), T);
    const std::vector<double> z0(gen.dim(), 0.0);
    for (double t : grid.t)
        for (double y : grid.y) {
            const double v = gen(t, y, z0);
            if (v != 0.0)
                throw ValidationError("g-expectation needs g(t,y,0) = 0; " + gen.tag() + " gives " + fmt(v) +
                                      " at t=" + fmt(t) + " y=" + fmt(y));
        }
}

DiscreteSolution g_expectation(const Generator& gen, const StateFn& xi, const MarkovModel& model, const TimeGrid& grid,
                               const LatticeSpec& spec)
{
    audit_zero_at_origin(gen, grid.T);
    return solve_markov_grid(gen, xi, model, grid, spec);
}

namespace {
double rms_diff(std::span<const double> a, std::span<const double> b)
{
    std::vector<double> d(a.size());
    simd::axpy(-1.0, b, a, d);
    return std::sqrt(simd::dot(d, d) / double(d.size()));
}
} // namespace

Report gexp_axiom_suite(const Generator& gen, const AxiomOptions& o)
{
    audit_zero_at_origin(gen);
    Report r;
    r.name = "gexp-axioms";
    r.data["generator"] = gen.tag();
    const auto bm = MarkovModel::brownian();
    const TimeGrid grid(1.0, o.steps);
    const LatticeSpec ls;

    double worst_const = 0;
    for (double c : {-1.3, 0.0, 2.5}) {
        const auto s = g_expectation(gen, [c](double) { return c; }, bm, grid, ls);
        for (const auto& row : s.y)
            for (double v : row) worst_const = std::max(worst_const, std::abs(v - c) / (1 + std::abs(c)));
    }
    r.check("constants preserved at every node", worst_const <= ls.picard_tol, worst_const, ls.picard_tol);

    const auto lo = g_expectation(gen, [](double x) { return x; }, bm, grid, ls);
    const auto hi = g_expectation(gen, [](double x) { return x + 0.5; }, bm, grid, ls);
    double worst_mono = -INFINITY;
    for (std::size_t i = 0; i <= grid.N; ++i)
        for (std::size_t j = 0; j < lo.y[i].size(); ++j) worst_mono = std::max(worst_mono, lo.y[i][j] - hi.y[i][j]);
    r.check("monotone: xi <= xi + 0.5", worst_mono <= 1e-9, worst_mono, 1e-9);
    r.margins["e_g_B1"] = lo.y0;

    // tower property: direct fit on one bundle, nested solve on an independent one
    const TimeGrid lg(1.0, o.lsmc_steps);
    const std::size_t ir = o.lsmc_steps / 4, it = o.lsmc_steps / 2;
    auto A = std::make_shared<const PathBundle>(simulate_paths(gen.dim(), lg, o.paths, o.seed));
    auto B = std::make_shared<const PathBundle>(simulate_paths(gen.dim(), lg, o.paths, o.seed + 1));
    auto endpoint = [](std::span<const double> s) { return s[0]; };
    const auto xiA = terminal_values(*A, endpoint);
    const auto direct = solve_lsmc(gen, xiA, A);
    std::vector<double> eta(B->M()), direct_r(B->M()), s(gen.dim());
    for (std::size_t m = 0; m < B->M(); ++m) {
        for (std::size_t k = 0; k < gen.dim(); ++k) s[k] = B->brownian(it, k)[m];
        eta[m] = direct.y_at(it, s);
        for (std::size_t k = 0; k < gen.dim(); ++k) s[k] = B->brownian(ir, k)[m];
        direct_r[m] = direct.y_at(ir, s);
    }
    const auto nested = solve_lsmc(gen, eta, B, {}, it);
    const double tower = rms_diff(nested.y_on_paths(ir), direct_r);
    r.check("tower property RMS at r=0.25 via t=0.5", tower <= 1e-2, tower, 1e-2);

    // 1_A factorization with A = {B_0.5 > 0}
    BasisSpec ib;
    ib.indicator_time = 0.5;
    std::vector<double> xiAind(A->M());
    const auto b5 = A->brownian(it, 0);
    for (std::size_t m = 0; m < A->M(); ++m) xiAind[m] = b5[m] > 0 ? xiA[m] : 0.0;
    const auto fac = solve_lsmc(gen, xiAind, A, ib);
    double worst_fac = 0;
    for (std::size_t i = it; i < o.lsmc_steps; ++i) {
        auto y1 = fac.y_on_paths(i);
        auto y2 = direct.y_on_paths(i);
        for (std::size_t m = 0; m < y2.size(); ++m) y2[m] = b5[m] > 0 ? y2[m] : 0.0;
        worst_fac = std::max(worst_fac, rms_diff(y1, y2));
    }
    r.check("1_A factorization RMS for t >= 0.5", worst_fac <= 1e-2, worst_fac, 1e-2);
    r.margins["lsmc_y0"] = direct.y0;
    r.margins["lsmc_y0_se"] = direct.y0_se;
    return r;
}

// ---------------------------------------------------------------- robust bound

Report robust_bound(const PenaltySpec& pen, const RobustOptions& o)
{
    Report r;
    r.name = "robust-bound";
    const double T = 1.0, cl = o.clip;
    const auto gen = legendre_generator(pen, legendre_default_grid());
    const auto sol = solve_markov_grid(gen, [cl](double x) { return std::clamp(x, -cl, cl); }, MarkovModel::brownian(),
                                       TimeGrid(T, o.steps));
    const double U0 = sol.y0;
    const auto P = simulate_paths(1, TimeGrid(T, 1), o.paths, o.seed);
    const auto bT = P.brownian(1, 0);
    std::vector<double> xi(P.M());
    for (std::size_t m = 0; m < P.M(); ++m) xi[m] = std::clamp(bT[m], -cl, cl);
    if (*std::max_element(bT.begin(), bT.end()) > cl || *std::min_element(bT.begin(), bT.end()) < -cl)
        r.data["warning"] = "terminal clipped to [-" + fmt(cl) + ", " + fmt(cl) + "]";

    Json cands = Json::array();
    double best = INFINITY, best_se = 0, best_q = 0, worst_mass = 0;
    for (int k = -8; k <= 8; ++k) {
        const double q = 0.25 * k;
        const auto w = MeasureChangeSpec::constant({q}).weights(P);
        std::vector<double> wx(P.M());
        simd::mul(w, xi, wx);
        const double M = double(P.M());
        const double mw = simd::sum(w) / M, mx = simd::sum(wx) / M;
        const double sw = std::sqrt(std::max(simd::dot(w, w) / M - mw * mw, 0.0) / M);
        const double sx = std::sqrt(std::max(simd::dot(wx, wx) / M - mx * mx, 0.0) / M);
        worst_mass = std::max(worst_mass, std::abs(mw - 1) / std::max(sw, 1e-300));
        const double c = mx + T * pen.f(q);
        cands.push_back({{"q", q}, {"candidate", c}, {"se", sx}, {"mass", mw}});
        if (c < best) {
            best = c;
            best_se = sx;
            best_q = q;
        }
        if (k == 0) r.check("U0 <= E[xi] (q = 0)", U0 <= c + 3 * sx, U0 - c, 3 * sx);
    }
    r.data["candidates"] = cands;
    r.check("E[M^q] = 1 within 3 SE", worst_mass <= 3, worst_mass, 3);
    r.check("U0 <= min candidate + 3 SE", U0 <= best + 3 * best_se, U0 - best, 3 * best_se);
    r.check("duality gap on constant drifts", best - U0 <= o.gap_slack, best - U0, o.gap_slack,
            "best q=" + fmt(best_q));
    r.margins["U0"] = U0;
    r.margins["best_candidate"] = best;
    return r;
}

// ---------------------------------------------------------------- risk measures

double risk_rho(const Generator& gen, const StateFn& xi, const RiskOptions& o)
{
    const auto s = solve_markov_grid(gen, [&](double x) { return -xi(x); }, MarkovModel::brownian(), TimeGrid(1.0, o.steps),
                                     o.lattice);
    return s.y0;
}

Report risk_measure_eval(const Generator& gen, const StateFn& xi, const RiskOptions& o)
{
    if (gen.tag() != "log-z") throw ValidationError("risk_measure_eval: needs the log-z catalog generator, got " + gen.tag());
    const double lam = gen.param("lambda");
    Report r;
    r.name = "risk-measure";
    r.data["generator"] = gen.tag();
    r.data["lambda"] = lam;
    const double rho = risk_rho(gen, xi, o);
    r.margins["rho"] = rho;
    constexpr double kSolverTol = 1e-9;

    const double rmore = risk_rho(gen, [&](double x) { return xi(x) + 0.3 * (1 + std::tanh(x)) / 2; }, o);
    r.check("monotone (antitone)", rmore <= rho + kSolverTol, rmore - rho, kSolverTol);
    const double m = 0.7;
    const double rcash = risk_rho(gen, [&](double x) { return xi(x) + m; }, o);
    r.check("cash invariance", std::abs(rcash - (rho - m)) <= kSolverTol, std::abs(rcash - (rho - m)), kSolverTol);
    Json props{{"monotone", rmore <= rho + kSolverTol}, {"cash_invariance", std::abs(rcash - (rho - m)) <= kSolverTol}};

    if (lam > 0) {
        auto eta = [&](double x) { return std::sin(2 * x) - 0.5 * xi(x); };
        const double re = risk_rho(gen, eta, o);
        const double rmid = risk_rho(gen, [&](double x) { return 0.5 * (xi(x) + eta(x)); }, o);
        const double ex = rmid - 0.5 * (rho + re);
        r.check("convex: midpoint", ex <= 1e-6, ex, 1e-6);
        props["convex"] = ex <= 1e-6;
    }
    if (lam == 0) {
        double worst = 0;
        for (double t : {0.5, 2.0}) {
            const double rt = risk_rho(gen, [&](double x) { return t * xi(x); }, o);
            worst = std::max(worst, std::abs(rt - t * rho));
        }
        r.check("positive homogeneity t in {0.5, 2}", worst <= 2e-2, worst, 2e-2);
        props["homogeneous"] = worst <= 2e-2;
    }
    if (lam < 0) {
        double worst = INFINITY;
        for (double t : {1.5, 2.0, 3.0}) {
            const double rt = risk_rho(gen, [&](double x) { return t * xi(x); }, o);
            worst = std::min(worst, rt - t * rho);
        }
        r.check("star-shaped rho(t xi) >= t rho(xi), t >= 1 (experimental)", worst >= -1e-6, worst, -1e-6);
        props["star_shaped"] = worst >= -1e-6;
    }
    r.data["properties"] = props;
    r.data["tolerances"] = {{"solver", kSolverTol}, {"homogeneity", 2e-2}, {"convexity", 1e-6}};
    return r;
}

} // namespace bsdelab
