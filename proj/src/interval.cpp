#include "cpa/interval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cpa {
namespace {

constexpr double kPadRel = 4e-15;
constexpr double kPadAbs = 1e-300;

double pad_down(double v) { return v - (std::abs(v) * kPadRel + kPadAbs); }
double pad_up(double v) { return v + (std::abs(v) * kPadRel + kPadAbs); }

// Outward-pad an interval computed in round-to-nearest arithmetic.
Interval padded(double lo, double hi) { return Interval(pad_down(lo), pad_up(hi)); }

}  // namespace

Interval::Interval(double lo_, double hi_) : lo(lo_), hi(hi_) {
    if (!(lo <= hi)) throw IntervalError("invalid interval: lo > hi");
    if (std::isnan(lo) || std::isnan(hi)) throw IntervalError("NaN interval endpoint");
}

double Interval::mag() const { return std::max(std::abs(lo), std::abs(hi)); }

Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }

Interval operator+(const Interval& a, const Interval& b) {
    return padded(a.lo + b.lo, a.hi + b.hi);
}

Interval operator-(const Interval& a, const Interval& b) {
    return padded(a.lo - b.hi, a.hi - b.lo);
}

Interval operator*(const Interval& a, const Interval& b) {
    const double p1 = a.lo * b.lo, p2 = a.lo * b.hi, p3 = a.hi * b.lo, p4 = a.hi * b.hi;
    return padded(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

Interval operator/(const Interval& a, const Interval& b) {
    if (b.contains_zero()) throw IntervalError("division by interval containing zero");
    const double p1 = a.lo / b.lo, p2 = a.lo / b.hi, p3 = a.hi / b.lo, p4 = a.hi / b.hi;
    return padded(std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4}));
}

double pow_int(double x, int p) {
    double r = 1.0;
    for (int i = 0; i < p; ++i) r *= x;
    return r;
}

Interval pow_int(const Interval& a, int p) {
    if (p < 0) throw IntervalError("negative integer exponent");
    if (p == 0) return Interval(1.0);
    if (p == 1) return a;
    if (p % 2 == 1) {
        // Odd power is monotone.
        return padded(pow_int(a.lo, p), pow_int(a.hi, p));
    }
    // Even power: range of |x|^p.
    const double m = a.mag();
    double lo = 0.0;
    if (!a.contains_zero()) lo = pow_int(std::min(std::abs(a.lo), std::abs(a.hi)), p);
    return padded(lo, pow_int(m, p));
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// True if sin attains a minimum (x = 2*pi*k - pi/2) inside [lo, hi].
bool sin_has_min(double lo, double hi) {
    const double k = std::ceil((lo + kPi / 2) / (2 * kPi));
    return 2 * kPi * k - kPi / 2 <= hi;
}

// True if sin attains a maximum (x = 2*pi*k + pi/2) inside [lo, hi].
bool sin_has_max(double lo, double hi) {
    const double k = std::floor((hi - kPi / 2) / (2 * kPi));
    return 2 * kPi * k + kPi / 2 >= lo;
}

}  // namespace

Interval sin(const Interval& a) {
    if (a.width() >= 2 * kPi) return Interval(-1.0, 1.0);
    const double slo = std::sin(a.lo), shi = std::sin(a.hi);
    double lo = sin_has_min(a.lo, a.hi) ? -1.0 : pad_down(std::min(slo, shi));
    double hi = sin_has_max(a.lo, a.hi) ? 1.0 : pad_up(std::max(slo, shi));
    return Interval(std::max(lo, -1.0), std::min(hi, 1.0));
}

Interval cos(const Interval& a) {
    // cos(x) = sin(x + pi/2); shift with padding on the (inexact) adds.
    return sin(padded(a.lo + kPi / 2, a.hi + kPi / 2));
}

Interval exp(const Interval& a) {
    return padded(std::exp(a.lo), std::exp(a.hi));
}

}  // namespace cpa
