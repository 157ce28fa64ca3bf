#pragma once

#include <cmath>

// Minimal double-double arithmetic (error-free transformations via fma).
// Used where a discriminant of the form A^2 - B^2 cancels catastrophically
// near a wavefront; plain doubles lose ~half the digits there.

namespace convecta::detail {

struct dd {
    double hi = 0.0;
    double lo = 0.0;
    double value() const { return hi + lo; }
};

inline dd two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

inline dd two_prod(double a, double b) {
    double p = a * b;
    double err = std::fma(a, b, -p);
    return {p, err};
}

inline dd dd_add(dd a, dd b) {
    dd s = two_sum(a.hi, b.hi);
    s.lo += a.lo + b.lo;
    dd t = two_sum(s.hi, s.lo);
    return t;
}

inline dd dd_sub(dd a, dd b) { return dd_add(a, {-b.hi, -b.lo}); }

inline dd dd_mul(dd a, dd b) {
    dd p = two_prod(a.hi, b.hi);
    p.lo += a.hi * b.lo + a.lo * b.hi;
    dd t = two_sum(p.hi, p.lo);
    return t;
}

inline dd dd_from(double x) { return {x, 0.0}; }

inline dd dd_sq(dd a) { return dd_mul(a, a); }

} // namespace convecta::detail
