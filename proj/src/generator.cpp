#include "bsdelab/generator.hpp"

#include "bsdelab/applications.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bsdelab {

TimeFunction::TimeFunction(std::vector<double> breaks, std::vector<double> values)
    : breaks_(std::move(breaks)), values_(std::move(values))
{
    if (values_.size() != breaks_.size() + 1)
        throw ValidationError("TimeFunction: need one more value than breakpoints");
    if (!std::is_sorted(breaks_.begin(), breaks_.end()))
        throw ValidationError("TimeFunction: breakpoints must be sorted");
}

double TimeFunction::operator()(double t) const
{
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
    return values_[std::size_t(it - breaks_.begin())];
}

double TimeFunction::integral(double a, double b) const
{
    if (b < a) return -integral(b, a);
    double s = 0.0, lo = a;
    for (std::size_t i = 0; i <= breaks_.size(); ++i) {
        const double hi = i < breaks_.size() ? std::min(b, breaks_[i]) : b;
        if (hi > lo) {
            s += values_[i] * (hi - lo);
            lo = hi;
        }
        if (lo >= b) break;
    }
    return s;
}

double TimeFunction::sup() const { return *std::max_element(values_.begin(), values_.end()); }
double TimeFunction::inf() const { return *std::min_element(values_.begin(), values_.end()); }

GrowthSpec::GrowthSpec(double alpha, double beta, double gamma, double delta, double lambda, TimeFunction f)
    : alpha_(alpha), beta_(beta), gamma_(gamma), delta_(delta), lambda_(lambda), f_(std::move(f))
{
    if (!(alpha >= 1.0 && alpha <= 2.0)) throw ValidationError("GrowthSpec: alpha must lie in [1,2]");
    if (!(beta >= 0.0)) throw ValidationError("GrowthSpec: beta must be nonnegative");
    if (!(gamma > 0.0)) throw ValidationError("GrowthSpec: gamma must be strictly positive");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ValidationError("GrowthSpec: delta must lie in [0,1]");
    if (!std::isfinite(lambda)) throw ValidationError("GrowthSpec: lambda must be finite");
    if (f_.inf() < 0.0) throw ValidationError("GrowthSpec: f must be nonnegative");
}

double GrowthSpec::conjugate() const
{
    if (alpha_ == 1.0) return std::numeric_limits<double>::infinity();
    return alpha_ / (alpha_ - 1.0);
}

double GrowthSpec::derived_p() const { return std::max({delta_, lambda_ + 0.5, 2.0 * lambda_}); }

double GrowthSpec::h(double x, double xbar) const
{
    double v = 0.0;
    if (beta_ != 0.0 && x != 0.0) v += beta_ * x * (delta_ == 0.0 ? 1.0 : std::pow(ln_e_plus(x), delta_));
    if (xbar != 0.0) {
        const double za = alpha_ == 1.0 ? xbar : alpha_ == 2.0 ? xbar * xbar : std::pow(xbar, alpha_);
        v += gamma_ * za * (lambda_ == 0.0 ? 1.0 : std::pow(ln_e_plus(xbar), lambda_));
    }
    return v;
}

double GrowthSpec::envelope(double t, double abs_y, double abs_z) const { return f_(t) + h(abs_y, abs_z); }

bool ModulusSpec::audit(std::string* why) const
{
    auto fail = [&](const std::string& m) {
        if (why) *why = m;
        return false;
    };
    if (!rho || !kappa) return fail("modulus functions missing");
    if (rho(0.0) != 0.0) return fail("rho(0) != 0");
    if (kappa(0.0) != 0.0) return fail("kappa(0) != 0");
    std::vector<double> u{0.0};
    for (int j = -60; j <= 60; ++j) u.push_back(std::pow(10.0, j / 10.0));
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double r = rho(u[i]), k = kappa(u[i]);
        if (r > A * (u[i] + 1.0) + 1e-12) return fail("rho exceeds A(u+1) at u=" + std::to_string(u[i]));
        if (k > A * (u[i] + 1.0) + 1e-12) return fail("kappa exceeds A(u+1) at u=" + std::to_string(u[i]));
        if (i > 0) {
            if (r < rho(u[i - 1]) - 1e-12) return fail("rho decreasing");
            if (k < kappa(u[i - 1]) - 1e-12) return fail("kappa decreasing");
            if (i + 1 < u.size()) {
                const double mid = 0.5 * (u[i - 1] + u[i + 1]);
                if (rho(mid) < 0.5 * (rho(u[i - 1]) + rho(u[i + 1])) - 1e-12) return fail("rho not concave");
            }
        }
    }
    return true;
}

Generator::Generator(std::string tag, GeneratorFn fn, std::size_t dim, Params params,
                     std::optional<GrowthSpec> growth, Regularity reg, std::optional<Domination> dom)
    : tag_(std::move(tag)), fn_(std::move(fn)), dim_(dim), params_(std::move(params)), growth_(std::move(growth)),
      reg_(reg), dom_(std::move(dom))
{
    if (!fn_) throw ValidationError("Generator: empty evaluation function");
    if (dim_ == 0) throw ValidationError("Generator: dimension must be positive");
}

double Generator::param(const std::string& key) const
{
    auto it = params_.find(key);
    if (it == params_.end()) throw ValidationError("generator " + tag_ + " has no parameter " + key);
    return it->second;
}

Generator Generator::with_growth(GrowthSpec g) const
{
    Generator out = *this;
    out.growth_ = std::move(g);
    return out;
}

AuditGrid AuditGrid::standard(std::size_t dim, double T)
{
    AuditGrid g;
    for (int i = 0; i <= 20; ++i) g.t.push_back(T * i / 20.0);
    std::vector<double> mag{0.0};
    for (int j = -12; j <= 12; ++j) mag.push_back(std::pow(10.0, j / 2.0));
    for (double m : mag) {
        g.y.push_back(m);
        if (m > 0) g.y.push_back(-m);
    }
    std::vector<std::vector<double>> dirs;
    if (dim == 1) {
        dirs = {{1.0}, {-1.0}};
    } else {
        const double r = 1.0 / std::sqrt(2.0);
        std::vector<std::vector<double>> base2 = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {r, r}, {r, -r}, {-r, r}, {-r, -r}};
        for (auto& b : base2) {
            std::vector<double> v(dim, 0.0);
            v[0] = b[0];
            v[1] = b[1];
            dirs.push_back(v);
        }
    }
    g.z.push_back(std::vector<double>(dim, 0.0));
    for (double m : mag) {
        if (m == 0) continue;
        for (auto& d : dirs) {
            std::vector<double> v(dim);
            for (std::size_t k = 0; k < dim; ++k) v[k] = m * d[k];
            g.z.push_back(v);
        }
    }
    return g;
}

namespace {
double norm(std::span<const double> z)
{
    if (z.size() == 1) return std::abs(z[0]);
    double s = 0.0;
    for (double v : z) s += v * v;
    return std::sqrt(s);
}
} // namespace

GrowthReport check_growth(const Generator& gen, const GrowthSpec& spec, const AuditGrid& grid)
{
    if (grid.size() == 0) throw ValidationError("check_growth: empty audit grid");
    GrowthReport rep;
    const bool dom = gen.domination().has_value();
    rep.domination_checked = dom;
    for (double x : grid.x)
        for (double t : grid.t)
            for (double y : grid.y)
                for (const auto& z : grid.z) {
                    if (z.size() != gen.dim()) throw ValidationError("check_growth: grid z dimension mismatch");
                    const double g = gen.at_state(t, x, y, z);
                    const double az = norm(z);
                    const double env = spec.envelope(t, std::abs(y), az);
                    if (!std::isfinite(g)) {
                        rep.max_violation = INFINITY;
                        rep.witness_t = t;
                        rep.witness_y = y;
                        rep.witness_z = z;
                        rep.points++;
                        continue;
                    }
                    // rounding allowance of a few ulps of the envelope on top of the absolute slack
                    const double v = sgn(y) * g - env - 4.0 * std::numeric_limits<double>::epsilon() * std::abs(env);
                    if (v > rep.max_violation) {
                        rep.max_violation = v;
                        rep.witness_t = t;
                        rep.witness_y = y;
                        rep.witness_z = z;
                    }
                    if (dom) {
                        const auto& d = *gen.domination();
                        const double bound = d.H(t, std::abs(y)) + d.Gamma(t, std::abs(y)) * az * az;
                        const double dv = std::abs(g) - bound - 4.0 * std::numeric_limits<double>::epsilon() * bound;
                        rep.domination_max_violation = std::max(rep.domination_max_violation, dv);
                        if (dv > 1e-12) rep.domination_passed = false;
                    }
                    rep.points++;
                }
    rep.passed = rep.max_violation <= 1e-12 && rep.domination_passed;
    return rep;
}

namespace {

std::string describe(const GrowthReport& r)
{
    std::ostringstream os;
    os << "max violation " << r.max_violation << " at (t=" << r.witness_t << ", y=" << r.witness_y << ", z=(";
    for (std::size_t k = 0; k < r.witness_z.size(); ++k) os << (k ? "," : "") << r.witness_z[k];
    os << "))";
    return os.str();
}

Generator admit(Generator g)
{
    if (!g.growth()) throw ValidationError("generator " + g.tag() + " declares no growth spec");
    const auto rep = check_growth(g, *g.growth(), AuditGrid::standard(g.dim()));
    if (!rep.passed) throw ValidationError("generator " + g.tag() + " fails its declared growth: " + describe(rep));
    return g;
}

double getp(const Params& p, const char* key, double dflt)
{
    auto it = p.find(key);
    return it == p.end() ? dflt : it->second;
}

void only_keys(std::string_view tag, const Params& p, std::initializer_list<const char*> keys)
{
    for (const auto& [k, v] : p) {
        bool ok = false;
        for (const char* a : keys) ok = ok || k == a;
        if (!ok) throw ValidationError("generator " + std::string(tag) + ": unknown parameter " + k);
        if (!std::isfinite(v)) throw ValidationError("generator " + std::string(tag) + ": parameter " + k + " not finite");
    }
}

const std::vector<std::string> kTags = {"zero",          "constant",        "linear",         "abs-z",
                                        "log-z",         "quadratic-half",  "neg-2-sqrt-y-plus",
                                        "neg-3-zpow23",  "sqrt-abs-y",      "z1sq-minus-z2sq",
                                        "z-over-sqrtlog", "z-sin-z",        "half-z1-sq",     "legendre-of"};

} // namespace

std::vector<std::string> catalog_tags() { return kTags; }

Generator make_generator(std::string_view tag, const Params& p)
{
    using Z = std::span<const double>;
    const std::string name(tag);
    Regularity lip;
    lip.lipschitz_y = lip.lipschitz_z = true;

    if (tag == "zero") {
        only_keys(tag, p, {});
        Regularity r = lip;
        r.convex = r.concave = true;
        return admit(Generator(name, [](double, double, double, Z) { return 0.0; }, 1, p, GrowthSpec(1, 0, 1), r));
    }
    if (tag == "constant") {
        only_keys(tag, p, {"value"});
        const double v = getp(p, "value", 0.0);
        Regularity r = lip;
        r.convex = r.concave = true;
        return admit(Generator(name, [v](double, double, double, Z) { return v; }, 1, p,
                               GrowthSpec(1, 0, 1, 0, 0, TimeFunction(std::abs(v))), r));
    }
    if (tag == "linear") {
        only_keys(tag, p, {"f", "beta", "gamma"});
        const double f = getp(p, "f", 0.0), b = getp(p, "beta", 0.0), c = getp(p, "gamma", 0.0);
        if (b < 0 || c < 0) throw ValidationError("linear: beta and gamma must be nonnegative");
        Regularity r = lip;
        r.convex = true;
        r.un1 = r.un2 = true;
        return admit(Generator(name, [=](double, double, double y, Z z) { return f + b * y + c * norm(z); }, 1, p,
                               GrowthSpec(1, b, c > 0 ? c : 1.0, 0, 0, TimeFunction(std::abs(f))), r));
    }
    if (tag == "abs-z") {
        only_keys(tag, p, {"gamma"});
        const double c = getp(p, "gamma", 1.0);
        if (!(c > 0)) throw ValidationError("abs-z: gamma must be positive");
        Regularity r = lip;
        r.convex = true;
        r.un1 = r.un2 = true;
        return admit(Generator(name, [c](double, double, double, Z z) { return c * norm(z); }, 1, p,
                               GrowthSpec(1, 0, c), r));
    }
    if (tag == "log-z") {
        only_keys(tag, p, {"c", "lambda"});
        const double c = getp(p, "c", 1.0), lam = getp(p, "lambda", 0.0);
        if (!(c > 0)) throw ValidationError("log-z: c must be positive");
        const double s = lam >= 0 ? 1.0 : -1.0;
        Regularity r;
        r.lipschitz_y = true;
        r.lipschitz_z = lam <= 0;
        r.convex = lam >= 0;
        r.concave = lam < 0;
        return admit(Generator(
            name,
            [=](double, double, double, Z z) {
                const double a = norm(z);
                return a == 0 ? 0.0 : c * s * a * (lam == 0 ? 1.0 : std::pow(ln_e_plus(a), lam));
            },
            1, p, GrowthSpec(1, 0, c, 0, lam), r));
    }
    if (tag == "quadratic-half") {
        only_keys(tag, p, {});
        Regularity r;
        r.lipschitz_y = true;
        r.convex = true;
        Domination d{[](double, double) { return 0.0; }, [](double, double) { return 0.5; }};
        return admit(Generator(
            name,
            [](double, double, double, Z z) {
                double s = 0.0;
                for (double v : z) s += v * v;
                return 0.5 * s;
            },
            1, p, GrowthSpec(2, 0, 0.5), r, d));
    }
    if (tag == "neg-2-sqrt-y-plus") {
        only_keys(tag, p, {});
        Regularity r;
        r.lipschitz_z = true;
        r.concave = true;
        return admit(Generator(name, [](double, double, double y, Z) { return -2.0 * std::sqrt(pos(y)); }, 1, p,
                               GrowthSpec(1, 1, 1, 0, 0, TimeFunction(1.0)), r));
    }
    if (tag == "neg-3-zpow23") {
        only_keys(tag, p, {"coef"});
        const double k = getp(p, "coef", 3.0);
        if (!(k > 0)) throw ValidationError("neg-3-zpow23: coef must be positive");
        Regularity r;
        r.lipschitz_y = true;
        r.concave = true;
        return admit(Generator(name, [k](double, double, double, Z z) { return -k * std::cbrt(norm(z) * norm(z)); }, 1,
                               p, GrowthSpec(1, 0, k, 0, 0, TimeFunction(k)), r));
    }
    if (tag == "sqrt-abs-y") {
        only_keys(tag, p, {});
        Regularity r;
        r.lipschitz_z = true;
        return admit(Generator(name, [](double, double, double y, Z) { return std::sqrt(std::abs(y)); }, 1, p,
                               GrowthSpec(1, 1, 1, 0, 0, TimeFunction(1.0)), r));
    }
    if (tag == "z1sq-minus-z2sq") {
        only_keys(tag, p, {});
        Regularity r;
        r.lipschitz_y = true;
        Domination d{[](double, double) { return 0.0; }, [](double, double) { return 1.0; }};
        return admit(Generator(name, [](double, double, double, Z z) { return z[0] * z[0] - z[1] * z[1]; }, 2, p,
                               GrowthSpec(2, 0, 1), r, d));
    }
    if (tag == "z-over-sqrtlog") {
        only_keys(tag, p, {});
        Regularity r = lip;
        return admit(Generator(
            name, [](double, double, double, Z z) { const double a = norm(z); return a / std::sqrt(ln_e_plus(a)); }, 1,
            p, GrowthSpec(1, 0, 1, 0, -0.5), r));
    }
    if (tag == "z-sin-z") {
        only_keys(tag, p, {});
        Regularity r;
        r.lipschitz_y = true;
        return admit(Generator(
            name, [](double, double, double, Z z) { const double a = norm(z); return a * std::sin(a); }, 1, p,
            GrowthSpec(1, 0, 1), r));
    }
    if (tag == "half-z1-sq") {
        only_keys(tag, p, {});
        Regularity r;
        r.lipschitz_y = true;
        r.convex = true;
        Domination d{[](double, double) { return 0.0; }, [](double, double) { return 0.5; }};
        return admit(Generator(name, [](double, double, double, Z z) { return 0.5 * z[0] * z[0]; }, 2, p,
                               GrowthSpec(2, 0, 0.5), r, d));
    }
    if (tag == "legendre-of") {
        only_keys(tag, p, {"c", "alpha_star"});
        const double c = getp(p, "c", 0.5), as = getp(p, "alpha_star", 2.0);
        if (!(as >= 2.0)) throw ValidationError("legendre-of: alpha_star must be at least 2 (growth at most quadratic)");
        return admit(legendre_generator(PenaltySpec::power(c, as), legendre_default_grid()));
    }
    throw ValidationError("unknown generator tag: " + name);
}

Generator truncate(const Generator& gen, double n, double p)
{
    if (!(n >= 1.0) || !(p >= 1.0)) throw ValidationError("truncate: n and p must be at least 1");
    auto fn = [gen, n, p](double t, double x, double y, std::span<const double> z) {
        return truncate_value(gen.at_state(t, x, y, z), n, p);
    };
    Params params = gen.params();
    params["trunc_n"] = n;
    params["trunc_p"] = p;
    Regularity r = gen.regularity();
    r.convex = r.concave = false;
    return Generator(gen.tag() + "^{n,p}", fn, gen.dim(), params, gen.growth(), r);
}

namespace expr {

enum class Op { Time, Y, Z, ZNorm, Const, Add, Sub, Mul, Neg, Abs, Sgn, Sqrt, Exp, LnEPlus, Pow, Sin };

struct Node {
    Op op;
    double value = 0.0;
    std::size_t index = 0;
    Expr a, b;
};

namespace {
Expr make(Op op, Expr a = nullptr, Expr b = nullptr, double v = 0.0, std::size_t idx = 0)
{
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    n->value = v;
    n->index = idx;
    return n;
}
Expr need(Expr e)
{
    if (!e) throw ValidationError("expression: null operand");
    return e;
}
} // namespace

Expr time() { return make(Op::Time); }
Expr y() { return make(Op::Y); }
Expr z(std::size_t k) { return make(Op::Z, nullptr, nullptr, 0.0, k); }
Expr znorm() { return make(Op::ZNorm); }
Expr constant(double c) { return make(Op::Const, nullptr, nullptr, c); }
Expr operator+(Expr a, Expr b) { return make(Op::Add, need(a), need(b)); }
Expr operator-(Expr a, Expr b) { return make(Op::Sub, need(a), need(b)); }
Expr operator*(Expr a, Expr b) { return make(Op::Mul, need(a), need(b)); }
Expr operator-(Expr a) { return make(Op::Neg, need(a)); }
Expr operator*(double c, Expr a) { return constant(c) * need(a); }
Expr abs(Expr a) { return make(Op::Abs, need(a)); }
Expr sgn(Expr a) { return make(Op::Sgn, need(a)); }
Expr sqrt(Expr a) { return make(Op::Sqrt, need(a)); }
Expr exp(Expr a) { return make(Op::Exp, need(a)); }
Expr ln_e_plus(Expr a) { return make(Op::LnEPlus, need(a)); }
Expr pow(Expr a, double p) { return make(Op::Pow, need(a), nullptr, p); }
Expr sin(Expr a) { return make(Op::Sin, need(a)); }

double eval(const Node& e, double t, double yv, std::span<const double> zv)
{
    auto A = [&] { return eval(*e.a, t, yv, zv); };
    auto B = [&] { return eval(*e.b, t, yv, zv); };
    switch (e.op) {
    case Op::Time: return t;
    case Op::Y: return yv;
    case Op::Z:
        if (e.index >= zv.size()) throw ValidationError("expression: z index out of range");
        return zv[e.index];
    case Op::ZNorm: return norm(zv);
    case Op::Const: return e.value;
    case Op::Add: return A() + B();
    case Op::Sub: return A() - B();
    case Op::Mul: return A() * B();
    case Op::Neg: return -A();
    case Op::Abs: return std::abs(A());
    case Op::Sgn: return bsdelab::sgn(A());
    // square root and ln(e+.) act on the magnitude so evaluation stays total
    case Op::Sqrt: return std::sqrt(std::abs(A()));
    case Op::Exp: return std::exp(A());
    case Op::LnEPlus: return bsdelab::ln_e_plus(std::abs(A()));
    case Op::Pow: return std::pow(std::abs(A()), e.value);
    case Op::Sin: return std::sin(A());
    }
    return 0.0;
}

} // namespace expr

Generator composite(std::string name, expr::Expr e, std::size_t dim, GrowthSpec declared, Regularity reg)
{
    if (!e) throw ValidationError("composite: null expression");
    auto fn = [e](double t, double, double y, std::span<const double> z) { return expr::eval(*e, t, y, z); };
    return admit(Generator(std::move(name), fn, dim, {}, std::move(declared), reg));
}

} // namespace bsdelab
