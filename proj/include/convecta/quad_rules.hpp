#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

// Adaptive 1-D quadrature on Gauss-Kronrod 7/15 panels. Subdivision is a
// deterministic depth-first bisection, so converged results are bit-stable
// under re-evaluation. The rule is open: endpoints are never evaluated, which
// lets callers split exactly at integrable singularities.

namespace convecta {

struct QuadratureValue {
    double value = 0.0;
    double abs_err = 0.0;
    long evals = 0;
    bool converged = true;
};

namespace detail {

// nodes on [0,1] half-panel: {abscissa, Gauss-7 weight, Kronrod-15 weight}
inline constexpr double gk15_nodes[8][3] = {
    {0.000000000000000000, 0.417959183673469388, 0.209482141084727828},
    {0.405845151377397167, 0.381830050505118945, 0.190350578064785410},
    {0.741531185599394440, 0.279705391489276668, 0.140653259715525919},
    {0.949107912342758525, 0.129484966168869693, 0.063092092629978553},
    {0.207784955007898468, 0.0,                  0.204432940075298892},
    {0.586087235467691130, 0.0,                  0.169004726639267903},
    {0.864864423359769073, 0.0,                  0.104790010322250184},
    {0.991455371120812639, 0.0,                  0.022935322010529225},
};

template <typename F>
inline void gk15_panel(const F& f, double a, double b, double& val, double& err, long& evals) {
    const double c = 0.5 * (a + b);
    const double hl = 0.5 * (b - a);
    double f0 = f(c);
    double g7 = gk15_nodes[0][1] * f0;
    double k15 = gk15_nodes[0][2] * f0;
    for (int i = 1; i < 8; ++i) {
        const double dx = hl * gk15_nodes[i][0];
        const double fi = f(c + dx) + f(c - dx);
        g7 += gk15_nodes[i][1] * fi;
        k15 += gk15_nodes[i][2] * fi;
    }
    g7 *= hl;
    k15 *= hl;
    evals += 15;
    val = k15;
    // QUADPACK-style error sharpening
    double d = std::fabs(g7 - k15);
    err = d;
    if (d > 0.0) {
        double scaled = 200.0 * d;
        err = std::min(d, scaled * std::sqrt(scaled) * 1e-2);
        err = std::max(err, 1e-16 * std::fabs(k15));
    }
}

template <typename F>
inline void adapt_rec(const F& f, double a, double b, double tol, int depth, QuadratureValue& out,
                      long max_evals) {
    double val, err;
    gk15_panel(f, a, b, val, err, out.evals);
    if (err <= tol || depth >= 52) {
        out.value += val;
        out.abs_err += err;
        if (err > tol) out.converged = false;
        return;
    }
    if (out.evals >= max_evals) {
        out.value += val;
        out.abs_err += err;
        out.converged = false;
        return;
    }
    const double m = 0.5 * (a + b);
    adapt_rec(f, a, m, 0.5 * tol, depth + 1, out, max_evals);
    adapt_rec(f, m, b, 0.5 * tol, depth + 1, out, max_evals);
}

} // namespace detail

// Integrate f over (a,b) to absolute tolerance abs_tol (plus a relative
// floor). f may blow up integrably at the interval ends.
template <typename F>
QuadratureValue integrate(const F& f, double a, double b, double abs_tol,
                          long max_evals = 1000000) {
    QuadratureValue out;
    if (!(b > a)) {
        if (b == a) return out;
        throw std::invalid_argument("integrate: b < a");
    }
    detail::adapt_rec(f, a, b, abs_tol, 0, out, max_evals);
    return out;
}

// Same, splitting first at interior breakpoints (sorted, clipped to (a,b)).
template <typename F>
QuadratureValue integrate_split(const F& f, double a, double b, std::vector<double> pts,
                                double abs_tol, long max_evals = 1000000) {
    pts.push_back(a);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    QuadratureValue out;
    std::vector<std::pair<double, double>> segs;
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double lo = std::max(a, pts[i]);
        double hi = std::min(b, pts[i + 1]);
        if (hi > lo) segs.emplace_back(lo, hi);
    }
    if (segs.empty()) return out;
    const double per = abs_tol / static_cast<double>(segs.size());
    for (auto [lo, hi] : segs) {
        QuadratureValue part;
        detail::adapt_rec(f, lo, hi, per, 0, part, max_evals - out.evals);
        out.value += part.value;
        out.abs_err += part.abs_err;
        out.evals += part.evals;
        out.converged = out.converged && part.converged;
    }
    return out;
}

// Fixed-order Gauss-Legendre (for smooth per-shell integrands).
namespace detail {
inline constexpr double gl12_x[6] = {0.125233408511469, 0.367831498998180, 0.587317954286617,
                                     0.769902674194305, 0.904117256370475, 0.981560634246719};
inline constexpr double gl12_w[6] = {0.249147045813403, 0.233492536538355, 0.203167426723066,
                                     0.160078328543346, 0.106939325995318, 0.047175336386512};
} // namespace detail

template <typename F>
double gauss12(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 6; ++i) {
        s += detail::gl12_w[i] * (f(c + h * detail::gl12_x[i]) + f(c - h * detail::gl12_x[i]));
    }
    return s * h;
}

} // namespace convecta
