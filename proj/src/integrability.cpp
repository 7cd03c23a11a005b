#include "bsdelab/integrability.hpp"

#include "bsdelab/quadrature.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace bsdelab {

std::string YoungSpace::name() const
{
    switch (kind) {
    case YoungKind::Lp: return "Lp";
    case YoungKind::LlogLp: return "LlogLp";
    case YoungKind::LexpMuLogLp: return "LexpMuLogLp";
    case YoungKind::ExpMuLp: return "expMuLp";
    case YoungKind::Linf: return "Linf";
    }
    return "?";
}

void YoungSpace::validate() const
{
    if (kind == YoungKind::Linf) return;
    if (!(p > 0)) throw ValidationError(name() + ": p must be positive");
    if ((kind == YoungKind::LexpMuLogLp || kind == YoungKind::ExpMuLp) && !(mu > 0))
        throw ValidationError(name() + ": mu must be positive");
    if (kind == YoungKind::Lp && !(p >= 1)) throw ValidationError("Lp: p must be at least 1");
}

double young_value(const YoungSpace& s, double x)
{
    if (x < 0) throw ValidationError("young_value: x must be nonnegative");
    switch (s.kind) {
    case YoungKind::Lp: return s.p == 2.0 ? x * x : std::pow(x, s.p);
    case YoungKind::LlogLp: return x * std::pow(ln_e_plus(x), s.p);
    case YoungKind::LexpMuLogLp: return x * std::exp(s.mu * std::pow(ln_e_plus(x), s.p));
    case YoungKind::ExpMuLp: return std::exp(s.mu * std::pow(x, s.p));
    case YoungKind::Linf: return x;
    }
    return 0.0;
}

namespace {
// ln(e + x) from log x
double ln_e_plus_from_log(double lx)
{
    if (lx < 700) return ln_e_plus(std::exp(lx));
    return lx + std::log1p(kE * std::exp(-lx));
}
} // namespace

double log_young_value(const YoungSpace& s, double lx)
{
    switch (s.kind) {
    case YoungKind::Lp: return s.p * lx;
    case YoungKind::LlogLp: return lx + s.p * std::log(ln_e_plus_from_log(lx));
    case YoungKind::LexpMuLogLp: return lx + s.mu * std::pow(ln_e_plus_from_log(lx), s.p);
    case YoungKind::ExpMuLp: return s.mu * std::exp(s.p * lx);
    case YoungKind::Linf: return lx;
    }
    return 0.0;
}

TerminalSpec TerminalSpec::of_brownian(std::function<double(double)> fn, double T, std::function<double(double)> la)
{
    if (!fn) throw ValidationError("TerminalSpec: empty function");
    if (!(T > 0)) throw ValidationError("TerminalSpec: horizon must be positive");
    TerminalSpec t;
    t.form_ = Form::Function;
    t.T_ = T;
    t.fn_ = std::move(fn);
    t.log_abs_fn_ = std::move(la);
    return t;
}

TerminalSpec TerminalSpec::constant(double c, double T)
{
    TerminalSpec t;
    t.form_ = Form::Constant;
    t.c_ = c;
    t.T_ = T;
    return t;
}

TerminalSpec TerminalSpec::samples(std::vector<double> v, double T)
{
    TerminalSpec t;
    t.form_ = Form::Samples;
    t.samples_ = std::move(v);
    t.T_ = T;
    return t;
}

double TerminalSpec::operator()(double b) const
{
    switch (form_) {
    case Form::Function: return fn_(b);
    case Form::Constant: return c_;
    case Form::Samples: break;
    }
    throw ValidationError("TerminalSpec: sample sets cannot be evaluated pointwise");
}

double TerminalSpec::log_abs(double b) const
{
    if (form_ == Form::Function && log_abs_fn_) return log_abs_fn_(b);
    return std::log(std::abs((*this)(b)));
}

std::string_view membership_name(Membership m)
{
    switch (m) {
    case Membership::Finite: return "finite";
    case Membership::Divergent: return "divergent";
    case Membership::Inconclusive: return "inconclusive";
    }
    return "?";
}

std::string MembershipVerdict::json() const
{
    nlohmann::ordered_json j;
    j["space"] = space.name();
    j["params"] = {{"mu", space.mu}, {"p", space.p}};
    j["verdict"] = membership_name(verdict);
    j["value_or_rate"] = value_or_rate;
    nlohmann::ordered_json w = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < log_windows.size(); ++i)
        w.push_back({{"radius", window_radius[i]}, {"log_partial", log_windows[i]}});
    j["windows"] = w;
    j["heuristic"] = heuristic;
    if (!note.empty()) j["note"] = note;
    return j.dump();
}

MembershipVerdict classify_membership(const TerminalSpec& xi, const YoungSpace& space)
{
    space.validate();
    MembershipVerdict v;
    v.space = space;

    if (xi.form() == TerminalSpec::Form::Constant) {
        v.verdict = Membership::Finite;
        v.value_or_rate = young_value(space, std::abs(xi.constant_value()));
        v.note = "bounded variable";
        return v;
    }
    if (xi.form() == TerminalSpec::Form::Samples) {
        const auto& s = xi.sample_values();
        double acc = 0.0;
        for (double x : s) acc += young_value(space, std::abs(x));
        v.verdict = Membership::Inconclusive;
        v.value_or_rate = s.empty() ? 0.0 : acc / double(s.size());
        v.note = "sample-set input: a finite sample cannot certify finiteness or divergence; value is the sample mean";
        return v;
    }

    const double sT = std::sqrt(xi.T());
    const auto& gl = gauss_legendre(512);
    // log of the integrand Phi(|xi(b)|) * density of B_T at b
    auto log_integrand = [&](double b) {
        const double la = xi.log_abs(b);
        const double ld = -0.5 * b * b / xi.T() - 0.5 * std::log(2 * std::numbers::pi * xi.T());
        if (la == -INFINITY) return space.kind == YoungKind::ExpMuLp ? ld : -INFINITY;
        return log_young_value(space, la) + ld;
    };
    auto log_piece = [&](double a, double b) {
        double acc = -INFINITY;
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double li = log_integrand(mid + half * gl.nodes[i]);
            if (std::isnan(li)) return double(NAN);
            acc = log_add(acc, li + std::log(gl.weights[i] * half));
        }
        return acc;
    };

    double sup_abs = 0.0;
    double total = -INFINITY;
    double prev_r = 0.0;
    for (int j = 3; j <= 12; ++j) {
        const double r = std::ldexp(1.0, j) * sT;
        double piece = -INFINITY;
        if (space.kind == YoungKind::Linf) {
            for (std::size_t i = 0; i < gl.nodes.size(); ++i)
                for (double sgnb : {-1.0, 1.0}) {
                    const double b = sgnb * (prev_r + (r - prev_r) * 0.5 * (gl.nodes[i] + 1));
                    sup_abs = std::max(sup_abs, std::abs(xi(b)));
                }
            total = std::log(sup_abs);
        } else {
            piece = log_add(log_piece(-r, -prev_r), log_piece(prev_r, r));
            total = log_add(total, piece);
        }
        v.window_radius.push_back(r);
        v.log_windows.push_back(total);
        prev_r = r;
        if (std::isnan(total)) break;
    }

    const auto& w = v.log_windows;
    const std::size_t n = w.size();
    if (space.kind == YoungKind::Linf) {
        const bool stable = n >= 2 && std::isfinite(w[n - 1]) && w[n - 1] - w[n - 2] <= 1e-12;
        v.verdict = stable ? Membership::Finite : Membership::Divergent;
        v.value_or_rate = stable ? sup_abs : std::exp(w[n - 1] - w[n - 2]);
        v.heuristic = !stable;
        v.note = stable ? "supremum saturated across windows" : "supremum still growing across windows";
        return v;
    }
    if (std::isnan(w.back())) {
        v.verdict = Membership::Inconclusive;
        v.note = "integrand not evaluable";
        return v;
    }
    if (w.back() == INFINITY) {
        v.verdict = Membership::Divergent;
        v.value_or_rate = INFINITY;
        v.heuristic = false;
        v.note = "partial integral overflows";
        return v;
    }
    bool growing = n >= 5;
    for (std::size_t i = n >= 4 ? n - 4 : 0; i < n && growing; ++i) growing = w[i] - w[i - 1] >= std::log(1.1);
    if (growing) {
        v.verdict = Membership::Divergent;
        v.value_or_rate = std::exp(w[n - 1] - w[n - 2]);
        v.heuristic = true;
        v.note = "partial integrals grow without saturation across window doublings";
        return v;
    }
    const double inc = -std::expm1(w[n - 2] - w[n - 1]);
    if (inc <= 1e-10) {
        v.verdict = Membership::Finite;
        v.value_or_rate = std::exp(w[n - 1]);
        v.note = "partial integrals saturate";
        return v;
    }
    v.verdict = Membership::Inconclusive;
    v.value_or_rate = inc;
    v.note = "partial integrals neither saturate nor grow geometrically";
    return v;
}

} // namespace bsdelab
