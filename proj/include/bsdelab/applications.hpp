#pragma once

#include "bsdelab/bsde.hpp"
#include "bsdelab/report.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bsdelab {

// Girsanov drift, piecewise constant in time: q[k] applies on [breaks[k-1], breaks[k]).
struct MeasureChangeSpec {
    std::vector<double> breaks;              // interior breakpoints, ascending
    std::vector<std::vector<double>> q;      // breaks.size()+1 drift vectors

    static MeasureChangeSpec constant(std::vector<double> q);
    const std::vector<double>& at(double t) const;
    double max_norm() const;
    // exponential martingale weight at the bundle's horizon, one per path
    std::vector<double> weights(const PathBundle& paths) const;
};

// Convex penalty on the real line with f(0) = 0. `quad_coercivity` a and
// `offset` b bound it below: f(x) >= a x^2 - b; a = 0 means not
// superquadratically coercive.
struct PenaltySpec {
    std::string name;
    std::function<double(double)> f;
    double quad_coercivity = 0.0;
    double offset = 0.0;
    // c|x|^{alpha*}, when the penalty is of that form
    double power_c = 0.0, power_exponent = 0.0;

    static PenaltySpec power(double c, double alpha_star);
    static PenaltySpec custom(std::string name, std::function<double(double)> f, double quad_coercivity = 0.0,
                              double offset = 0.0);
    // f(0) = 0 and midpoint convexity on seeded random segments, slack 1e-9
    void audit(std::uint64_t seed = 1) const;
};

// inf_x (z x + f(x)) by bracketed golden-section search; throws
// ValidationError when the infimum is unbounded below.
struct LegendrePoint {
    double value;
    double argmin;
};
LegendrePoint legendre_value(const PenaltySpec& penalty, double z);

// -(1/c^{alpha-1}) ((alpha*-1)/(alpha*)^alpha) |z|^alpha
double legendre_power_closed_form(double c, double alpha_star, double z);

std::vector<double> legendre_default_grid();

// Generator g(z) = inf_x (z x + f(x)) tabulated on `zgrid` (cubic Hermite
// with slope argmin), exact minimization off the table. Audits g(0) = 0,
// g <= 0 and midpoint concavity on the table.
Generator legendre_generator(const PenaltySpec& penalty, const std::vector<double>& zgrid);

// sup_w (x w + g(-w)) should recover f; returns max |f** - f| over xs.
double double_conjugate_error(const PenaltySpec& penalty, const Generator& g, const std::vector<double>& xs);

// Throws ValidationError naming (t, y) where g(t, y, 0) != 0.
void audit_zero_at_origin(const Generator& gen, double T = 1.0);

// Conditional g-expectation on the lattice; Y_0 is E_g[xi].
DiscreteSolution g_expectation(const Generator& gen, const StateFn& xi, const MarkovModel& model, const TimeGrid& grid,
                               const LatticeSpec& spec = {});

struct AxiomOptions {
    std::uint64_t seed = 1;
    std::size_t steps = 200;
    std::size_t lsmc_steps = 40;
    std::size_t paths = 100000;
};
Report gexp_axiom_suite(const Generator& gen, const AxiomOptions& opt = {});

struct RobustOptions {
    std::uint64_t seed = 1;
    std::size_t steps = 200;
    std::size_t paths = 100000;
    double clip = 3.0;
    double gap_slack = 2e-2;
};
// xi = clip(B_T) under the constant-drift family q in [-2, 2] step 0.25
Report robust_bound(const PenaltySpec& penalty, const RobustOptions& opt = {});

struct RiskOptions {
    std::size_t steps = 200;
    LatticeSpec lattice;
};
// rho(xi) = Y_0 for terminal -xi under the log-z generator
double risk_rho(const Generator& gen, const StateFn& xi, const RiskOptions& opt = {});
Report risk_measure_eval(const Generator& gen, const StateFn& xi, const RiskOptions& opt = {});

} // namespace bsdelab
