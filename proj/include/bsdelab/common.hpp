#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace bsdelab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input, rejected parameters, unknown tags.
class ValidationError : public Error {
public:
    using Error::Error;
};

// An iterative or numerical procedure failed to reach its target.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

inline constexpr double kE = std::numbers::e;

// ln(e + x) for x >= 0 without cancellation near zero.
inline double ln_e_plus(double x) { return 1.0 + std::log1p(x / kE); }

inline double sgn(double x) { return x > 0.0 ? 1.0 : -1.0; }

inline double pos(double x) { return x > 0.0 ? x : 0.0; }
inline double neg(double x) { return x < 0.0 ? -x : 0.0; }

double normal_cdf(double x);
double normal_pdf(double x);

// log(exp(a) + exp(b)) without overflow
inline double log_add(double a, double b)
{
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

} // namespace bsdelab
