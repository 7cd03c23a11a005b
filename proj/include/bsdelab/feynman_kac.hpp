#pragma once

#include "bsdelab/bsde.hpp"
#include "bsdelab/report.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bsdelab {

struct FKProblem {
    std::function<double(double, double)> b;
    std::function<double(double, double)> sigma;
    StateFn h;
    Generator gen;
    double T = 1.0;
    // Lipschitz/boundedness constant of the coefficients
    double K = 1.0;
    // growth constants: sgn(y)g <= k(1+|x|^p+|y|+|z|^alpha), alpha in (1,2], p in [1, alpha*)
    double k = 1.0;
    double alpha = 2.0;
    double p = 1.0;

    FKProblem(std::function<double(double, double)> b, std::function<double(double, double)> sigma, StateFn h,
              Generator gen, double T = 1.0);
};

struct AuditResult {
    bool passed = true;
    double worst = -INFINITY;
    std::string witness;
};

// coefficient bounds and Lipschitz differences on a (t, x) grid
AuditResult audit_coefficients(const FKProblem& pb);
// both growth inequalities on a (t, x, y, z) grid
AuditResult audit_growth(const FKProblem& pb);

// Euler-Maruyama from (t0, x0) to T driven by a fresh Brownian bundle; the
// forward state is stored in the bundle.
PathBundle simulate_sde(const FKProblem& pb, double t0, double x0, std::size_t N, std::size_t M, std::uint64_t seed);

// Y_t of the forward-backward system started at (t, x), lattice backend.
double u_from_bsde(const FKProblem& pb, double t, double x, std::size_t N = 200, const LatticeSpec& spec = {});

struct PdeSolution {
    std::vector<double> t, x;
    std::vector<std::vector<double>> u;   // u[n][j] at (t[n], x[j])
    double dt = 0, dx = 0, theta = 1.0;
    std::string boundary = "linear extrapolation (zero second derivative)";

    double at(std::size_t n, double x) const;   // linear in x at time index n
    std::string csv() const;
};

// theta-scheme for u_t + b u_x + sigma^2/2 u_xx + g(t, x, u, sigma u_x) = 0,
// u(T) = h, backward in time. Throws ConvergenceError on blow-up with a
// suggested step.
PdeSolution solve_pde_fd(const FKProblem& pb, double x_lo, double x_hi, double dt, double dx, double theta = 1.0);

struct FdDefaults {
    double half_width = 6.0;
    double dt = 1.0 / 400;
    double dx = 0.02;
};

// |u_bsde - u_fd| at the probes and a Lipschitz continuity probe
Report consistency_check(const FKProblem& pb, const std::vector<double>& probes, double tol = 2e-2,
                         const FdDefaults& fd = {});

// u(0, 0) on [-w, w] against [-2w, 2w]
Report domain_doubling(const FKProblem& pb, double w = 6.0, double tol = 1e-4, const FdDefaults& fd = {});

// E[sup_s exp(mu |X_s|^q)] for x0 in `starts`, across M, 2M, 4M; fits the
// smallest C with stat(x0) <= C exp(mu C |x0|^q)
Report moment_bound_audit(const FKProblem& pb, double mu, double q, const std::vector<double>& starts, std::size_t M,
                          std::size_t N, std::uint64_t seed);

// C(x) = |u(0,x)| / (1 + |x|^p) over the points
Report growth_fit(const FKProblem& pb, const std::vector<double>& xs, std::size_t N = 200);

} // namespace bsdelab
