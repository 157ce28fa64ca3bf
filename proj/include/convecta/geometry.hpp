#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "convecta/detail/dd.hpp"

// Convected 2-D wave kernel for a uniform subsonic mean flow along x1:
//
//   G(t,x,m) = 1{ t - (rho(x) - m x1/(1-m^2)) >= 0 }
//              / ( 2 pi sqrt(1-m^2) sqrt( (t + m x1/(1-m^2))^2 - rho^2(x) ) ),
//   rho(x)   = sqrt( x1^2/(1-m^2)^2 + x2^2/(1-m^2) ).
//
// Everything here is pure and allocation-free; these sit in the innermost
// quadrature and Monte Carlo loops.

namespace convecta {

struct FlowConfig {
    double mach = 0.0; // m in [0,1), flow along x1
    double t0 = 1.0;   // time horizon

    FlowConfig() = default;
    FlowConfig(double m, double horizon) : mach(m), t0(horizon) {
        if (!(m >= 0.0 && m < 1.0)) throw std::invalid_argument("FlowConfig: need 0 <= mach < 1");
        if (!(horizon > 0.0)) throw std::invalid_argument("FlowConfig: need t0 > 0");
    }
    double beta() const { return (1.0 - mach) * (1.0 + mach); }
};

struct SpacePoint {
    double x1 = 0.0;
    double x2 = 0.0;
};

struct GreenValue {
    double value = 0.0;
    bool on_support = false;
    bool singular = false; // within the wavefront tolerance band
};

inline double rho(SpacePoint x, const FlowConfig& cfg) {
    const double b = cfg.beta();
    const double a = x.x1 / b;
    return std::sqrt(a * a + x.x2 * x.x2 / b);
}

// eta(theta) = sqrt( cos^2/b^2 + sin^2/b ); pi-periodic, decreasing on
// [0, pi/2] from 1/b down to 1/sqrt(b).
inline double eta(double theta, const FlowConfig& cfg) {
    const double b = cfg.beta();
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return std::sqrt(c * c / (b * b) + s * s / b);
}

inline double eta_min(const FlowConfig& cfg) { return 1.0 / std::sqrt(cfg.beta()); }
inline double eta_max(const FlowConfig& cfg) { return 1.0 / cfg.beta(); }

// Closed-form inverse of the monotone branch on [0, pi/2]:
//   v^2 = 1/b + cos^2(theta) m^2 / b^2  =>  cos^2 = (v^2 - 1/b) b^2 / m^2.
// Arguments above the range clamp to 0 (full angular interval), below the
// range to pi/2 (empty interval).
inline double eta_inverse_clamped(double v, const FlowConfig& cfg) {
    const double b = cfg.beta();
    if (cfg.mach == 0.0) return v >= 1.0 ? 0.0 : std::numbers::pi / 2;
    if (v >= 1.0 / b) return 0.0;
    if (v <= 1.0 / std::sqrt(b)) return std::numbers::pi / 2;
    const double c2 = (v * v - 1.0 / b) * b * b / (cfg.mach * cfg.mach);
    return std::acos(std::sqrt(std::min(1.0, std::max(0.0, c2))));
}

namespace detail {

// Scaled discriminant N = (t b + m x1)^2 - x1^2 - b x2^2 = b^2 ((t + m x1/b)^2 - rho^2),
// in double-double so the wavefront cancellation does not eat the digits.
inline double support_discriminant(double t, SpacePoint x, double m) {
    const dd b = dd_mul(two_sum(1.0, -m), two_sum(1.0, m)); // (1-m)(1+m)
    const dd p = dd_add(dd_mul(dd_from(t), b), two_prod(m, x.x1));
    dd n = dd_sub(dd_sq(p), two_prod(x.x1, x.x1));
    n = dd_sub(n, dd_mul(b, two_prod(x.x2, x.x2)));
    return n.value();
}

} // namespace detail

inline bool support_contains(double t, SpacePoint x, const FlowConfig& cfg) {
    if (t < 0.0) return false;
    return detail::support_discriminant(t, x, cfg.mach) >= 0.0;
}

inline GreenValue green(double t, SpacePoint x, const FlowConfig& cfg) {
    if (!(t > 0.0)) throw std::invalid_argument("green: need t > 0");
    const double b = cfg.beta();
    const double n = detail::support_discriminant(t, x, cfg.mach);
    if (n < 0.0) return {0.0, false, false};
    const double r = rho(x, cfg);
    const double tr = t + r;
    const double front_tol = 1e-12 * tr * tr * b * b; // on the N scale
    if (n < front_tol) return {0.0, true, true};
    return {std::sqrt(b) / (2.0 * std::numbers::pi * std::sqrt(n)), true, false};
}

// Algebraic consequence of the kernel formula: the convected kernel equals
// the classical one at x - m t e1.
inline SpacePoint moving_frame(double t, SpacePoint x, const FlowConfig& cfg) {
    return {x.x1 - cfg.mach * t, x.x2};
}

} // namespace convecta
