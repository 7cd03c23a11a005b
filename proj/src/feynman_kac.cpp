#include "bsdelab/feynman_kac.hpp"

#include "bsdelab/parallel.hpp"
#include "bsdelab/quadrature.hpp"

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

std::vector<double> audit_x()
{
    std::vector<double> x{0.0};
    for (int j = -8; j <= 8; ++j) {
        x.push_back(std::pow(10.0, j / 4.0));
        x.push_back(-std::pow(10.0, j / 4.0));
    }
    std::sort(x.begin(), x.end());
    return x;
}

// generator seen from a later start time
Generator shifted(const Generator& g, double t0)
{
    if (t0 == 0.0) return g;
    return Generator(
        g.tag(), [g, t0](double t, double x, double y, std::span<const double> z) { return g.at_state(t + t0, x, y, z); },
        g.dim(), g.params(), g.growth(), g.regularity(), g.domination());
}
} // namespace

FKProblem::FKProblem(std::function<double(double, double)> b_, std::function<double(double, double)> s_, StateFn h_,
                     Generator g_, double T_)
    : b(std::move(b_)), sigma(std::move(s_)), h(std::move(h_)), gen(std::move(g_)), T(T_)
{
    if (!b || !sigma || !h) throw ValidationError("FKProblem: coefficients and terminal function are required");
    if (gen.dim() != 1) throw ValidationError("FKProblem: one-dimensional state and noise only");
    if (!(T > 0)) throw ValidationError("FKProblem: horizon must be positive");
}

AuditResult audit_coefficients(const FKProblem& pb)
{
    AuditResult r;
    const auto xs = audit_x();
    for (int it = 0; it <= 10; ++it) {
        const double t = pb.T * it / 10.0;
        auto note = [&](double v, const std::string& what) {
            if (v > r.worst) r.worst = v;
            if (v > 0 && r.passed) {
                r.passed = false;
                r.witness = what + " at t=" + fmt(t);
            }
        };
        note(std::abs(pb.b(t, 0.0)) - pb.K, "|b(t,0)| > K");
        for (std::size_t j = 0; j < xs.size(); ++j) {
            note(std::abs(pb.sigma(t, xs[j])) - pb.K, "|sigma| > K at x=" + fmt(xs[j]));
            if (j + 1 < xs.size()) {
                const double dx = xs[j + 1] - xs[j];
                const double lb = std::abs(pb.b(t, xs[j + 1]) - pb.b(t, xs[j]));
                const double ls = std::abs(pb.sigma(t, xs[j + 1]) - pb.sigma(t, xs[j]));
                note(lb - pb.K * dx * (1 + 1e-12), "b not K-Lipschitz near x=" + fmt(xs[j]));
                note(ls - pb.K * dx * (1 + 1e-12), "sigma not K-Lipschitz near x=" + fmt(xs[j]));
            }
        }
    }
    return r;
}

AuditResult audit_growth(const FKProblem& pb)
{
    AuditResult r;
    if (!(pb.alpha > 1 && pb.alpha <= 2)) {
        r.passed = false;
        r.witness = "alpha must lie in (1,2]";
        return r;
    }
    const double as = pb.alpha / (pb.alpha - 1);
    if (!(pb.p >= 1 && pb.p < as)) {
        r.passed = false;
        r.witness = "p must lie in [1, alpha*)";
        return r;
    }
    const auto xs = audit_x();
    std::vector<double> ys, zs;
    for (int j = -6; j <= 4; ++j) {
        const double v = std::pow(10.0, j / 2.0);
        ys.push_back(v);
        ys.push_back(-v);
        zs.push_back(v);
        zs.push_back(-v);
    }
    ys.push_back(0);
    zs.push_back(0);
    const double e = 2.0 / as;
    for (int it = 0; it <= 10; ++it) {
        const double t = pb.T * it / 10.0;
        for (double x : xs) {
            const double hx = std::abs(pb.h(x));
            for (double y : ys)
                for (double z : zs) {
                    const double g = pb.gen.at_state(t, x, y, z);
                    const double xp = std::pow(std::abs(x), pb.p);
                    const double one = sgn(y) * g - pb.k * (1 + xp + std::abs(y) + std::pow(std::abs(z), pb.alpha));
                    const double ey = pb.k * std::pow(std::abs(y), e);
                    const double two = std::abs(g) + hx - pb.k * (1 + xp + (ey > 700 ? INFINITY : std::exp(ey)) + z * z);
                    const double v = std::max(one / (1 + std::abs(g)), two / (1 + std::abs(g) + hx));
                    if (v > r.worst) r.worst = v;
                    if (v > 1e-12 && r.passed) {
                        r.passed = false;
                        r.witness = std::string(one > two ? "one-sided growth" : "two-sided growth") + " fails at t=" +
                                    fmt(t) + " x=" + fmt(x) + " y=" + fmt(y) + " z=" + fmt(z);
                    }
                }
        }
    }
    return r;
}

PathBundle simulate_sde(const FKProblem& pb, double t0, double x0, std::size_t N, std::size_t M, std::uint64_t seed)
{
    const auto a1 = audit_coefficients(pb);
    if (!a1.passed) throw ValidationError("simulate_sde: coefficient audit failed: " + a1.witness);
    if (!(t0 >= 0 && t0 < pb.T)) throw ValidationError("simulate_sde: start time outside [0, T)");
    PathBundle P = simulate_paths(1, TimeGrid(pb.T - t0, N), M, seed);
    const double dt = P.grid().dt();
    std::vector<double> X((N + 1) * M);
    std::fill(X.begin(), X.begin() + std::ptrdiff_t(M), x0);
    for (std::size_t i = 0; i < N; ++i) {
        const double t = t0 + P.grid().t(i);
        const auto b0 = P.brownian(i, 0), b1 = P.brownian(i + 1, 0);
        for (std::size_t m = 0; m < M; ++m) {
            const double x = X[i * M + m];
            X[(i + 1) * M + m] = x + pb.b(t, x) * dt + pb.sigma(t, x) * (b1[m] - b0[m]);
        }
    }
    P.set_state(std::move(X));
    return P;
}

double u_from_bsde(const FKProblem& pb, double t, double x, std::size_t N, const LatticeSpec& spec)
{
    const auto a1 = audit_coefficients(pb);
    if (!a1.passed) throw ValidationError("u_from_bsde: coefficient audit failed: " + a1.witness);
    const auto a2 = audit_growth(pb);
    if (!a2.passed) throw ValidationError("u_from_bsde: growth audit failed: " + a2.witness);
    if (!(t >= 0 && t < pb.T)) throw ValidationError("u_from_bsde: t outside [0, T)");
    MarkovModel m;
    m.b = [&pb, t](double s, double y) { return pb.b(s + t, y); };
    m.sigma = [&pb, t](double s, double y) { return pb.sigma(s + t, y); };
    m.x0 = x;
    return solve_markov_grid(shifted(pb.gen, t), pb.h, m, TimeGrid(pb.T - t, N), spec).y0;
}

double PdeSolution::at(std::size_t n, double xv) const
{
    const double s = std::clamp((xv - x.front()) / dx, 0.0, double(x.size() - 1));
    const auto j = std::min<std::size_t>(std::size_t(s), x.size() - 2);
    const double f = s - double(j);
    return (1 - f) * u[n][j] + f * u[n][j + 1];
}

std::string PdeSolution::csv() const
{
    std::ostringstream os;
    os.precision(12);
    os << "t,x,u\n";
    for (std::size_t n = 0; n < t.size(); ++n)
        for (std::size_t j = 0; j < x.size(); ++j) os << t[n] << ',' << x[j] << ',' << u[n][j] << '\n';
    return os.str();
}

PdeSolution solve_pde_fd(const FKProblem& pb, double x_lo, double x_hi, double dt, double dx, double theta)
{
    if (!(x_hi > x_lo) || !(dx > 0) || !(dt > 0)) throw ValidationError("solve_pde_fd: bad rectangle or steps");
    if (!(theta >= 0 && theta <= 1)) throw ValidationError("solve_pde_fd: theta must lie in [0,1]");
    const auto J = std::size_t(std::llround((x_hi - x_lo) / dx)) + 1;
    if (J < 5) throw ValidationError("solve_pde_fd: need at least 5 space nodes");
    const auto Nt = std::size_t(std::llround(pb.T / dt));
    PdeSolution sol;
    sol.dx = (x_hi - x_lo) / double(J - 1);
    sol.dt = pb.T / double(Nt);
    sol.theta = theta;
    const double h = sol.dx, k = sol.dt;
    sol.x.resize(J);
    for (std::size_t j = 0; j < J; ++j) sol.x[j] = x_lo + h * double(j);
    sol.t.resize(Nt + 1);
    for (std::size_t n = 0; n <= Nt; ++n) sol.t[n] = n == Nt ? pb.T : k * double(n);
    sol.u.assign(Nt + 1, std::vector<double>(J));
    double hmax = 0;
    for (std::size_t j = 0; j < J; ++j) {
        sol.u[Nt][j] = pb.h(sol.x[j]);
        hmax = std::max(hmax, std::abs(sol.u[Nt][j]));
    }

    // L u = lo u_{j-1} + di u_j + up u_{j+1} with upwind advection
    std::vector<double> lo(J), di(J), up(J), src(J), rhs(J), a(J), bb(J), c(J), cp(J), dp(J);
    auto coeffs = [&](double t) {
        for (std::size_t j = 1; j + 1 < J; ++j) {
            const double x = sol.x[j], bv = pb.b(t, x), s = pb.sigma(t, x);
            const double dif = 0.5 * s * s / (h * h);
            lo[j] = dif + (bv < 0 ? -bv / h : 0.0);
            up[j] = dif + (bv > 0 ? bv / h : 0.0);
            di[j] = -2 * dif - std::abs(bv) / h;
        }
    };
    auto source = [&](double t, const std::vector<double>& u) {
        for (std::size_t j = 1; j + 1 < J; ++j) {
            const double ux = (u[j + 1] - u[j - 1]) / (2 * h);
            src[j] = pb.gen.at_state(t, sol.x[j], u[j], pb.sigma(t, sol.x[j]) * ux);
        }
    };
    // (I - theta k L) u = rhs on interior nodes, boundary rows folded in
    auto solve = [&](std::vector<double>& u) {
        const std::size_t n = J - 2;
        for (std::size_t j = 1; j + 1 < J; ++j) {
            a[j] = -theta * k * lo[j];
            bb[j] = 1 - theta * k * di[j];
            c[j] = -theta * k * up[j];
        }
        // u_0 = 2u_1 - u_2, u_{J-1} = 2u_{J-2} - u_{J-3}
        bb[1] += 2 * a[1];
        c[1] -= a[1];
        bb[J - 2] += 2 * c[J - 2];
        a[J - 2] -= c[J - 2];
        // row 1 and row J-2 are tridiagonal after folding (n >= 3)
        cp[1] = c[1] / bb[1];
        dp[1] = rhs[1] / bb[1];
        for (std::size_t j = 2; j <= n; ++j) {
            const double m = bb[j] - a[j] * cp[j - 1];
            cp[j] = c[j] / m;
            dp[j] = (rhs[j] - a[j] * dp[j - 1]) / m;
        }
        u[n] = dp[n];
        for (std::size_t j = n - 1; j >= 1; --j) u[j] = dp[j] - cp[j] * u[j + 1];
        u[0] = 2 * u[1] - u[2];
        u[J - 1] = 2 * u[J - 2] - u[J - 3];
    };

    for (std::size_t n = Nt; n-- > 0;) {
        const double t = sol.t[n];
        const auto& un = sol.u[n + 1];
        coeffs(t);
        source(t, un);
        auto explicit_rhs = [&] {
            for (std::size_t j = 1; j + 1 < J; ++j) {
                const double Lu = lo[j] * un[j - 1] + di[j] * un[j] + up[j] * un[j + 1];
                rhs[j] = un[j] + (1 - theta) * k * Lu + k * src[j];
            }
        };
        explicit_rhs();
        std::vector<double>& u = sol.u[n];
        solve(u);
        // one Picard correction of the source
        source(t, u);
        explicit_rhs();
        solve(u);
        double m = 0;
        for (double v : u) m = std::isfinite(v) ? std::max(m, std::abs(v)) : INFINITY;
        if (!(m <= 1e6 * (1 + hmax)))
            throw ConvergenceError("solve_pde_fd: solution blew up at t=" + fmt(t) + "; try dt=" + fmt(k / 2));
    }
    return sol;
}

Report consistency_check(const FKProblem& pb, const std::vector<double>& probes, double tol, const FdDefaults& fd)
{
    if (probes.empty()) throw ValidationError("consistency_check: no probe points");
    Report r;
    r.name = "fk-consistency";
    const double s = std::abs(pb.sigma(0.0, 0.0));
    const double lo = *std::min_element(probes.begin(), probes.end()) - fd.half_width * std::max(s, 1.0) * std::sqrt(pb.T);
    const double hi = *std::max_element(probes.begin(), probes.end()) + fd.half_width * std::max(s, 1.0) * std::sqrt(pb.T);
    const auto pde = solve_pde_fd(pb, lo, hi, fd.dt, fd.dx);
    Json pts = Json::array();
    double worst = 0;
    std::vector<double> uf;
    for (double x : probes) {
        const double ub = u_from_bsde(pb, 0.0, x);
        const double u = pde.at(0, x);
        uf.push_back(u);
        worst = std::max(worst, std::abs(ub - u));
        pts.push_back({{"x", x}, {"u_bsde", ub}, {"u_fd", u}});
    }
    r.data["probes"] = pts;
    r.check("|u_bsde - u_fd| at probes", worst <= tol, worst, tol);
    double lip = 0;
    for (std::size_t j = 1; j < pde.x.size(); ++j)
        lip = std::max(lip, std::abs(pde.u[0][j] - pde.u[0][j - 1]) / pde.dx);
    double worst_lip = 0;
    for (std::size_t a = 1; a < probes.size(); ++a) {
        const double dx = std::abs(probes[a] - probes[a - 1]);
        if (dx > 0) worst_lip = std::max(worst_lip, std::abs(uf[a] - uf[a - 1]) / dx);
    }
    r.check("probe differences bounded by the grid Lipschitz constant", worst_lip <= 1.1 * lip + 1e-9, worst_lip,
            1.1 * lip + 1e-9);
    r.margins["max_abs_diff"] = worst;
    return r;
}

Report domain_doubling(const FKProblem& pb, double w, double tol, const FdDefaults& fd)
{
    Report r;
    r.name = "fk-domain-doubling";
    const double a = solve_pde_fd(pb, -w, w, fd.dt, fd.dx).at(0, 0.0);
    const double b = solve_pde_fd(pb, -2 * w, 2 * w, fd.dt, fd.dx).at(0, 0.0);
    r.check("u(0,0) change under domain doubling", std::abs(a - b) < tol, std::abs(a - b), tol);
    r.margins["u_small"] = a;
    r.margins["u_large"] = b;
    return r;
}

Report moment_bound_audit(const FKProblem& pb, double mu, double q, const std::vector<double>& starts, std::size_t M,
                          std::size_t N, std::uint64_t seed)
{
    if (!(q >= 1 && q < 2)) throw ValidationError("moment_bound_audit: q must lie in [1,2)");
    Report r;
    r.name = "fk-moment-bound";
    Json rows = Json::array();
    double C = 1.0, worst_change = 0;
    for (double x0 : starts) {
        std::vector<double> stats;
        for (std::size_t f = 1; f <= 4; f *= 2) {
            const auto P = simulate_sde(pb, 0.0, x0, N, M * f, seed);
            double acc = 0;
            for (std::size_t m = 0; m < P.M(); ++m) {
                double s = 0;
                for (std::size_t i = 0; i <= N; ++i) s = std::max(s, std::abs(P.state(i)[m]));
                acc += std::exp(mu * std::pow(s, q));
            }
            stats.push_back(acc / double(P.M()));
        }
        for (std::size_t a = 1; a < stats.size(); ++a)
            worst_change = std::max(worst_change, std::abs(stats[a] / stats[a - 1] - 1));
        // smallest C with stat <= C exp(mu C |x0|^q), by bisection on the monotone map
        const double st = stats.back(), xq = std::pow(std::abs(x0), q);
        double lo = 0, hi = std::max(1.0, st);
        while (hi * std::exp(mu * hi * xq) < st) hi *= 2;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mid * std::exp(mu * mid * xq) >= st ? hi : lo) = mid;
        }
        C = std::max(C, hi);
        rows.push_back({{"x0", x0}, {"stat_M", stats[0]}, {"stat_2M", stats[1]}, {"stat_4M", stats[2]}, {"C_x0", hi}});
    }
    r.data["rows"] = rows;
    r.margins["fitted_C"] = C;
    r.check("sup statistic finite", std::isfinite(C), C, INFINITY);
    r.check("stable across path-count doublings", worst_change <= 0.1, worst_change, 0.1);
    return r;
}

Report growth_fit(const FKProblem& pb, const std::vector<double>& xs, std::size_t N)
{
    Report r;
    r.name = "fk-growth";
    Json rows = Json::array();
    double Cmax = 0, Cinner = 0, xmax = 0;
    for (double x : xs) xmax = std::max(xmax, std::abs(x));
    for (double x : xs) {
        const double u = u_from_bsde(pb, 0.0, x, N);
        const double c = std::abs(u) / (1 + std::pow(std::abs(x), pb.p));
        Cmax = std::max(Cmax, c);
        if (std::abs(x) < xmax) Cinner = std::max(Cinner, c);
        rows.push_back({{"x", x}, {"u", u}, {"C_x", c}});
    }
    r.data["rows"] = rows;
    r.margins["fitted_C"] = Cmax;
    r.check("C does not grow at the outermost points", Cmax <= 1.5 * Cinner + 1e-12, Cmax, 1.5 * Cinner);
    return r;
}

} // namespace bsdelab
