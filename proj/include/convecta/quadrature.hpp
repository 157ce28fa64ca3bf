#pragma once

#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "convecta/covariance.hpp"
#include "convecta/geometry.hpp"
#include "convecta/quad_rules.hpp"

// Deterministic quadrature for the second-moment and increment oracles of the
// mild solution X(t,x) = int G(t-s, x-y, m) dF(s,y).
//
// Everything reduces to the classical frame: a common shift of both spatial
// arguments by m*s*e1 leaves the covariance f(||y-z||) and the domain pair
// invariant, so E[X(t1,x) X(t2,x+dx)] equals its m = 0 value at the effective
// offset dx - m*(t2-t1)*e1. The remaining integral is assembled as
//
//   int r f(r) [angular average of U(t1,t2,.)] dr,
//   U(t1,t2,p) = int_0^t1 int G0(t1-s,y) G0(t2-s,y+p e1) dy ds,
//
// with the f singularity at r = 0 handled by dyadic shells and the kernel
// time integral by endpoint-absorbing substitutions. A slower direct route
// that integrates the convected kernel verbatim (no frame reduction) is kept
// so the reduction itself stays testable.

namespace convecta {

struct ExistenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IncrementSpec {
    enum class Kind { TimeShift, SpaceShift };
    Kind kind = Kind::TimeShift;
    double h = 0.0;  // increment magnitude, 0 < h
    int axis = 1;    // 1 or 2, SpaceShift only
    double t = 0.0;  // base time
};

enum class MomentRoute { Reduced, Direct };

// int_{s0}^{s1} ds / sqrt((s^2-a^2)(s^2-b^2)) with 0 <= a <= b <= s0 < s1.
// The endpoint singularity at s0 = b is removed exactly by s = b cosh(u).
// a == b requires s0 > b (the integral diverges at s0 = b).
QuadratureValue time_kernel_exact(double a, double b, double s0, double s1,
                                  double tol = 1e-10);

// Sandwich for int_b^{s1}: (1/(2 s1)) L <= exact <= (1/(2 b)) L with
// L = ln((sqrt(s1^2-b^2)+sqrt(s1^2-a^2))^2 / (b^2-a^2)); needs 0 <= a < b < s1.
std::pair<double, double> time_kernel_log_bounds(double a, double b, double s1);

// Covariance-independent kernel profile U(t1,t2,.) sampled on a log grid with
// a fitted c1 ln(1/p) + c2 asymptote below the grid (t1 == t2 only; for
// t1 < t2 the profile is bounded at 0). Shared by the moment assemblies.
class KernelProfile {
  public:
    KernelProfile(double t1, double t2, double node_tol);
    double operator()(double p) const;
    // conservative local error estimate (nearest-knot bracket)
    double error_at(double p) const;
    double t1() const { return t1_; }
    double t2() const { return t2_; }
    double abs_err() const { return err_; }
    long evals() const { return evals_; }
    double asymptote_c1() const { return c1_; }
    double asymptote_c2() const { return c2_; }

  private:
    double t1_, t2_, delta_;
    double rho_lo_, rho_max_;
    double c1_ = 0.0, c2_ = 0.0;
    double err_ = 0.0;
    long evals_ = 0;
    std::vector<double> x_, y_, m2_;     // spline on (ln p, U) over the body
    size_t seg_split_ = 0;               // knot index at p = delta (if kinked)
    std::vector<double> tx_, ty_, tm2_;  // support-edge spline: (ln eps, ln U)
    double tail_rho_ = 0.0;              // body/tail switch radius
    std::vector<double> knot_rho_, knot_err_;
    double spline_eval(double x) const;
};

// Shared profile cache (profiles are pure functions of (t1,t2,tol)).
std::shared_ptr<const KernelProfile> kernel_profile(double t1, double t2, double node_tol);

// Single U(t1,t2,rho) evaluation (the quantity the profile samples); exposed
// so tests can probe the kernel correlation directly.
QuadratureValue kernel_time_correlation(double t1, double t2, double rho, double abs_tol);

// E[|X(t,x)|^2]; x-independent by spatial homogeneity. Refuses models that
// fail the existence condition (no real-valued solution). rel_tol applies to
// the assembled value; Direct evaluates the convected kernel verbatim and is
// markedly slower and looser.
QuadratureValue second_moment(double t, const FlowConfig& cfg, const CovarianceModel& model,
                              double rel_tol = 1e-4, MomentRoute route = MomentRoute::Reduced);

// E[X(t1,x) X(t2,x+dx)], 0 < t1 <= t2 <= t0.
QuadratureValue cross_moment(double t1, double t2, SpacePoint dx, const FlowConfig& cfg,
                             const CovarianceModel& model, double rel_tol = 1e-4);

// E[|X(t,x) - X(t+h,x)|^2] or E[|X(t,x) - X(t,x+h e_axis)|^2], assembled from
// the two second moments and the cross moment.
QuadratureValue increment_moment(const IncrementSpec& spec, const FlowConfig& cfg,
                                 const CovarianceModel& model, double rel_tol = 1e-4);

// Modulus-of-continuity bound: triple integral over (r, w, theta) of
//   C1 r f(r) ln(1 + C2 t0 sqrt(h) / (w r eta/(1-m^2) - r^2 eta^2))
//     (ln(4(1+m)t0) - ln w),
// r in (0, 2 sqrt((1+m)/(1-m)) t0), w in (r sqrt(1-m^2), 2(1+m)t0),
// theta in (eta^{-1}(w/((1-m^2)r)) clamped, pi/2).
QuadratureValue modulus_bound(double t0, double h, const FlowConfig& cfg,
                              const CovarianceModel& model, double c1, double c2,
                              double rel_tol = 1e-3);

// Bracket integrals: int_0^t r f(r) ln(1/r) dr and
// int_0^{2 sqrt((1+m)/(1-m)) t} r f(r) (ln(1/r) + C4) dr.
QuadratureValue theorem1_lower(double t, const CovarianceModel& model);
QuadratureValue theorem1_upper(double t, const FlowConfig& cfg, const CovarianceModel& model,
                               double c4 = 1.0);

// Dyadic-shell evaluation of int_0^{r_hi} r f(r) w(r) dr for a radial weight
// w; shared driver for the assemblies above (exposed for tests).
template <typename W>
QuadratureValue radial_shell_integral(const CovarianceModel& f, double r_hi, W&& w,
                                      double rel_tol, int min_shells = 20,
                                      int max_shells = 240) {
    QuadratureValue out;
    double prev = 0.0;
    for (int k = 0; k < max_shells; ++k) {
        const double hi = std::ldexp(r_hi, -k);
        const double lo = 0.5 * hi;
        auto g = [&](double x) {
            double r = std::exp(x);
            return r * r * f.eval(r) * w(r);
        };
        const double fine = gauss12(g, std::log(lo), std::log(hi));
        const double coarse =
            gauss12(g, std::log(lo), 0.5 * (std::log(lo) + std::log(hi))) +
            gauss12(g, 0.5 * (std::log(lo) + std::log(hi)), std::log(hi));
        out.value += coarse;
        out.abs_err += std::abs(fine - coarse);
        out.evals += 36;
        const double s = std::abs(coarse);
        if (k >= min_shells && s < 1e-2 * rel_tol * std::abs(out.value) && s <= prev) {
            double q = prev > 0.0 ? std::min(s / prev, 0.99) : 0.5;
            out.abs_err += s * q / (1.0 - q);
            return out;
        }
        prev = s;
    }
    out.converged = false;
    return out;
}

} // namespace convecta
