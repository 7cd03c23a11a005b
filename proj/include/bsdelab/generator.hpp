#pragma once

#include "bsdelab/common.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bsdelab {

// Piecewise-constant, right-continuous deterministic function of time.
class TimeFunction {
public:
    TimeFunction() : TimeFunction(0.0) {}
    TimeFunction(double c) : values_{c} {}
    TimeFunction(std::vector<double> breaks, std::vector<double> values);

    double operator()(double t) const;
    // integral over [a, b]
    double integral(double a, double b) const;
    double sup() const;
    double inf() const;

private:
    std::vector<double> breaks_;
    std::vector<double> values_;
};

class GrowthSpec {
public:
    GrowthSpec(double alpha, double beta, double gamma, double delta = 0.0, double lambda = 0.0,
               TimeFunction f = TimeFunction(0.0));

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    double gamma() const { return gamma_; }
    double delta() const { return delta_; }
    double lambda() const { return lambda_; }
    const TimeFunction& f() const { return f_; }

    // 1/alpha + 1/alpha* = 1; +inf when alpha == 1
    double conjugate() const;
    bool conjugate_infinite() const { return alpha_ == 1.0; }
    // delta v (lambda + 1/2) v (2 lambda)
    double derived_p() const;

    // f(t) + beta|y|(ln(e+|y|))^delta + gamma|z|^alpha (ln(e+|z|))^lambda
    double envelope(double t, double abs_y, double abs_z) const;
    // beta x (ln(e+x))^delta + gamma xbar^alpha (ln(e+xbar))^lambda
    double h(double x, double xbar) const;

private:
    double alpha_, beta_, gamma_, delta_, lambda_;
    TimeFunction f_;
};

struct Regularity {
    bool lipschitz_y = false;
    bool lipschitz_z = false;
    bool convex = false;
    bool concave = false;
    bool un1 = false;
    bool un2 = false;
    // +1 / -1 selects the side of the (UN3) condition; 0 when not declared
    int un3_side = 0;
};

// (EX2): |g(t,y,z)| <= H(t,|y|) + Gamma(t,|y|) |z|^2
struct Domination {
    std::function<double(double, double)> H;
    std::function<double(double, double)> Gamma;
};

struct ModulusSpec {
    std::function<double(double)> rho;
    std::function<double(double)> kappa;
    double A = 1.0;

    // rho(u) <= A(u+1), kappa(u) <= A(u+1), both vanish at zero, rho concave
    // nondecreasing; checked on a log grid up to 1e6
    bool audit(std::string* why = nullptr) const;
};

using Params = std::map<std::string, double>;
// g(t, x, y, z); x is the forward state, ignored by state-free generators
using GeneratorFn = std::function<double(double t, double x, double y, std::span<const double> z)>;

class Generator {
public:
    Generator(std::string tag, GeneratorFn fn, std::size_t dim, Params params, std::optional<GrowthSpec> growth,
              Regularity reg = {}, std::optional<Domination> dom = std::nullopt);

    double operator()(double t, double y, std::span<const double> z) const { return fn_(t, 0.0, y, z); }
    double operator()(double t, double y, double z) const { return fn_(t, 0.0, y, std::span<const double>(&z, 1)); }
    double at_state(double t, double x, double y, std::span<const double> z) const { return fn_(t, x, y, z); }
    double at_state(double t, double x, double y, double z) const
    {
        return fn_(t, x, y, std::span<const double>(&z, 1));
    }

    const std::string& tag() const { return tag_; }
    const Params& params() const { return params_; }
    double param(const std::string& key) const;
    std::size_t dim() const { return dim_; }
    const std::optional<GrowthSpec>& growth() const { return growth_; }
    const Regularity& regularity() const { return reg_; }
    const std::optional<Domination>& domination() const { return dom_; }
    Generator with_growth(GrowthSpec g) const;

private:
    std::string tag_;
    GeneratorFn fn_;
    std::size_t dim_;
    Params params_;
    std::optional<GrowthSpec> growth_;
    Regularity reg_;
    std::optional<Domination> dom_;
};

struct AuditGrid {
    std::vector<double> t;
    std::vector<double> y;                // signed values
    std::vector<std::vector<double>> z;   // each of the generator's dimension
    std::vector<double> x{0.0};           // forward-state samples

    // 21 times on [0,T], |y| and |z| log-spaced up to 1e6, both signs
    static AuditGrid standard(std::size_t dim = 1, double T = 1.0);
    std::size_t size() const { return t.size() * y.size() * z.size() * x.size(); }
};

struct GrowthReport {
    bool passed = false;
    double max_violation = -INFINITY;
    double witness_t = 0, witness_y = 0;
    std::vector<double> witness_z;
    std::size_t points = 0;
    bool domination_checked = false;
    bool domination_passed = true;
    double domination_max_violation = -INFINITY;
};

GrowthReport check_growth(const Generator& gen, const GrowthSpec& spec, const AuditGrid& grid);

// Catalog lookup; throws ValidationError on unknown tags or rejected params.
// Every generator is audited against its declared growth before it is returned.
Generator make_generator(std::string_view tag, const Params& params = {});
std::vector<std::string> catalog_tags();

// min(g+, n) - min(g-, p)
Generator truncate(const Generator& gen, double n, double p);
inline double truncate_value(double v, double n, double p) { return std::min(pos(v), n) - std::min(neg(v), p); }

namespace expr {

struct Node;
using Expr = std::shared_ptr<const Node>;

Expr time();
Expr y();
Expr z(std::size_t k);
Expr znorm();
Expr constant(double c);
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator-(Expr a);
Expr operator*(double c, Expr a);
Expr abs(Expr a);
Expr sgn(Expr a);
Expr sqrt(Expr a);
Expr exp(Expr a);
Expr ln_e_plus(Expr a);
Expr pow(Expr a, double p);
Expr sin(Expr a);

double eval(const Node& e, double t, double y, std::span<const double> z);

} // namespace expr

// Admits an expression tree as a generator after a growth audit.
Generator composite(std::string name, expr::Expr e, std::size_t dim, GrowthSpec declared, Regularity reg = {});

} // namespace bsdelab
