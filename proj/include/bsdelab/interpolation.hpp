#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bsdelab {

// Fritsch-Carlson monotone cubic on a uniform grid, linear beyond the ends.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(double x0, double h, std::vector<double> y);

    double operator()(double x) const;
    bool inside(double x) const { return x >= x0_ && x <= x0_ + h_ * double(y_.size() - 1); }
    double lo() const { return x0_; }
    double hi() const { return x0_ + h_ * double(y_.size() - 1); }

private:
    double x0_ = 0.0;
    double h_ = 1.0;
    std::vector<double> y_;
    std::vector<double> m_;
};

// Cubic Hermite on arbitrary sorted nodes with given slopes.
class HermiteTable {
public:
    HermiteTable() = default;
    HermiteTable(std::vector<double> x, std::vector<double> y, std::vector<double> dy);
    double operator()(double x) const;
    bool inside(double x) const { return !x_.empty() && x >= x_.front() && x <= x_.back(); }

private:
    std::vector<double> x_, y_, dy_;
};

} // namespace bsdelab
