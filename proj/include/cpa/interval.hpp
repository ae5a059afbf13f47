#pragma once

#include <stdexcept>
#include <string>

namespace cpa {

struct IntervalError : std::runtime_error {
    explicit IntervalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Closed interval [lo, hi]. All arithmetic is outward-padded so the result
// encloses the true range of the operation over the operands.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double point) : lo(point), hi(point) {}
    Interval(double lo_, double hi_);

    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains_zero() const { return lo <= 0.0 && 0.0 <= hi; }
    double width() const { return hi - lo; }
    // Largest absolute value attained on the interval.
    double mag() const;
};

Interval operator-(const Interval& a);
Interval operator+(const Interval& a, const Interval& b);
Interval operator-(const Interval& a, const Interval& b);
Interval operator*(const Interval& a, const Interval& b);
Interval operator/(const Interval& a, const Interval& b);

// x^p for integer p >= 0, with even/odd case analysis so that e.g.
// [-1,2]^2 = [0,4] rather than [-2,4].
Interval pow_int(const Interval& a, int p);

Interval sin(const Interval& a);
Interval cos(const Interval& a);
Interval exp(const Interval& a);

// Integer power of a scalar by repeated multiplication; shared with the
// pointwise evaluator so interval endpoints and point evaluations agree.
double pow_int(double x, int p);

}  // namespace cpa
