#pragma once

#include "bsdelab/generator.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bsdelab {

enum class PhiFamily { LogDeficit, LogPower, ExpLogPower, Power, ExpLinear, ExpPower };

std::string_view family_name(PhiFamily f);
PhiFamily parse_family(std::string_view name);

struct PhiParams {
    double k = kE;
    double c = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    // exponent: log-power/power p, exp-log-power p, exp-power q = 2/alpha*
    double p = 0.0;
    double T = 1.0;
};

// Derivatives of phi divided by a positive gauge G(s,x). G is phi itself, or
// a*phi for the exponential families where a = c1 exp(c2 s), so that every
// entry stays representable when phi does not.
struct PhiRatios {
    long double dx;
    long double dxx;
    long double ds;
    // log of the gauge's a-factor (0 for gauge = phi)
    long double log_a;
};

class PhiSpec {
public:
    // Validates membership (phi >= 0, phi_s >= 0, phi_x > 0, phi_xx > 0) on the
    // audit grid and cross-checks the closed-form derivatives against central
    // differences. Throws ValidationError naming the failed condition.
    PhiSpec(PhiFamily family, PhiParams params);

    PhiFamily family() const { return family_; }
    const PhiParams& params() const { return params_; }

    double log_value(double s, double x) const;
    double value(double s, double x) const { return std::exp(log_value(s, x)); }
    // raw derivatives; may overflow for exponential families
    double dx(double s, double x) const;
    double dxx(double s, double x) const;
    double ds(double s, double x) const;
    PhiRatios ratios(double s, double x) const;
    // d/dx log phi and d^2/dx^2 log phi
    double dlog(double s, double x) const;
    double d2log(double s, double x) const;

    // Rescaled for exp-linear exp-power
    bool gauged() const { return family_ == PhiFamily::ExpLinear || family_ == PhiFamily::ExpPower; }

private:
    PhiFamily family_;
    PhiParams params_;
};

struct VerifyGrid {
    std::vector<double> s, x, xbar;
    // s in [0,T] (11 points), x and xbar in {0} U logspace(-6, 4, 61)
    static VerifyGrid standard(double T = 1.0);
};

struct VerifyReport {
    std::string family;
    PhiParams params;
    double smin = 0, smax = 0, xmax = 0, xbarmax = 0;
    // min over the grid of lhs/(1 + scale) with lhs and scale in gauge units
    double min_slack = INFINITY;
    double witness_s = 0, witness_x = 0, witness_xbar = 0;
    bool passed = false;
    std::size_t points = 0;
    std::size_t excluded = 0;
    std::vector<std::string> warnings;

    bool reduced_checked = false;
    std::string reduced_form;
    double reduced_min_slack = INFINITY;
    double reduced_witness_s = 0, reduced_witness_x = 0;
    bool reduced_passed = false;

    static std::string csv_header();
    std::string csv_row() const;
};

VerifyReport verify_inequality(const PhiSpec& phi, const GrowthSpec& growth, const VerifyGrid& grid);

// Left side of the test-function inequality in gauge units at one point.
long double inequality_lhs(const PhiSpec& phi, const GrowthSpec& growth, double s, double x, double xbar);

struct MakePhiOptions {
    // multiply thresholds by 1 + 1e-6
    bool margin = false;
    // exp-log-power: use c2 = (p+1)beta - 4^{lambda+} gamma^2 as printed instead of
    // the sign that makes the family a test function
    bool printed_exp_log_power_sign = false;
    double T = 1.0;
    double k_cap = 1e12;
};

struct PhiBuild {
    PhiSpec phi;
    VerifyReport report;
    double k_seed;     // 2 * find_min_k(lambda, 2)
    int doublings;     // extra doublings applied on top of the seed
};

PhiBuild make_phi(PhiFamily family, const GrowthSpec& growth, std::optional<double> extra_p = std::nullopt,
                  const MakePhiOptions& opt = {});

// Thresholds without any k search; throws ValidationError when the family's
// side conditions on the growth parameters are not met.
PhiParams phi_thresholds(PhiFamily family, const GrowthSpec& growth, std::optional<double> extra_p,
                         const MakePhiOptions& opt = {});

struct LogLemmaWitness {
    double lambda = 0, p = 0;
    double k = kE;
    bool holds = false;
    double violation_x = 0, violation_y = 0;
    // (lhs - rhs) / rhs at the witness, positive when violated
    double violation = 0;
    // appendix constant: smallest ladder k >= e^{|lambda-1|+1} meeting all three
    // conditions; +inf when none does (p = 1)
    double sufficient_k = INFINITY;
    std::size_t ladder_steps = 0;
};

// 2xy(ln(k+y))^lambda <= p x^2 (ln(k+x))^{2 lambda} + y^2
double log_lemma_gap(double lambda, double p, double k, double x, double y);
bool appendix_conditions(double lambda, double p, double k);
double appendix_sufficient_k(double lambda, double p, double cap = 1e12);

LogLemmaWitness find_min_k(double lambda, double p, double cap = 1e12);
// Grid check at a fixed k; fills violation fields with the worst point.
LogLemmaWitness check_log_lemma(double lambda, double p, double k);

} // namespace bsdelab
