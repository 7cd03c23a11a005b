#pragma once

#include "bsdelab/common.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bsdelab {

enum class YoungKind { Lp, LlogLp, LexpMuLogLp, ExpMuLp, Linf };

struct YoungSpace {
    YoungKind kind = YoungKind::Lp;
    double mu = 1.0;
    double p = 1.0;

    static YoungSpace lp(double p) { return {YoungKind::Lp, 1.0, p}; }
    static YoungSpace llogl(double p) { return {YoungKind::LlogLp, 1.0, p}; }
    static YoungSpace lexp_log(double mu, double p) { return {YoungKind::LexpMuLogLp, mu, p}; }
    static YoungSpace exp_pow(double mu, double p) { return {YoungKind::ExpMuLp, mu, p}; }
    static YoungSpace linf() { return {YoungKind::Linf, 1.0, 1.0}; }

    std::string name() const;
    void validate() const;
};

// x^p, x(ln(e+x))^p, x exp(mu (ln(e+x))^p), exp(mu x^p); identity for Linf
double young_value(const YoungSpace& space, double x);
// log of the weight given log x; stays finite where the weight overflows
double log_young_value(const YoungSpace& space, double log_x);

// Terminal variables xi = phi(B_T); log_abs, when given, returns log|xi| and is
// used instead of log(|value|) so heavy tails can be evaluated without overflow.
class TerminalSpec {
public:
    static TerminalSpec of_brownian(std::function<double(double)> fn, double T,
                                    std::function<double(double)> log_abs = {});
    static TerminalSpec constant(double c, double T = 1.0);
    static TerminalSpec samples(std::vector<double> values, double T = 1.0);

    enum class Form { Function, Constant, Samples };
    Form form() const { return form_; }
    double T() const { return T_; }
    double operator()(double b) const;
    double log_abs(double b) const;
    double constant_value() const { return c_; }
    const std::vector<double>& sample_values() const { return samples_; }

private:
    Form form_ = Form::Constant;
    double T_ = 1.0;
    double c_ = 0.0;
    std::function<double(double)> fn_;
    std::function<double(double)> log_abs_fn_;
    std::vector<double> samples_;
};

enum class Membership { Finite, Divergent, Inconclusive };

struct MembershipVerdict {
    YoungSpace space;
    Membership verdict = Membership::Inconclusive;
    // E[Phi(|xi|)] when finite, else the last window growth ratio
    double value_or_rate = 0.0;
    // log of the partial integrals per window
    std::vector<double> log_windows;
    std::vector<double> window_radius;
    bool heuristic = false;
    std::string note;

    std::string json() const;
};

MembershipVerdict classify_membership(const TerminalSpec& xi, const YoungSpace& space);

std::string_view membership_name(Membership m);

} // namespace bsdelab
