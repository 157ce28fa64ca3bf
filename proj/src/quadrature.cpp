#include "convecta/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "convecta/parallel.hpp"

namespace convecta {

namespace {

constexpr double kPi = std::numbers::pi;

struct Accum {
    double err = 0.0;
    long evals = 0;
    bool converged = true;
};

// ---------------------------------------------------------------------------
// shifted kernel integral
//   J = int_{tau_lo}^{tau_hi} dtau / sqrt((tau^2-c^2) ((tau+delta)^2-a^2))
// with tau_lo >= max(c, a-delta). The substitution tau = tau_lo + L xi^2
// absorbs the sqrt endpoint zero at tau_lo. Fixed two-panel Gauss: the outer
// integration schemes place their nodes so that the remaining variation is
// smooth, and a fixed rule keeps the integrand smooth in the outer variables
// (adaptive switching would inject noise the outer levels cannot integrate).
inline double kernel_J(double c, double a, double delta, double tau_lo, double tau_hi,
                       long& evals) {
    if (!(tau_hi > tau_lo)) return 0.0;
    const double len = tau_hi - tau_lo;
    auto F = [&](double xi) {
        const double tau = tau_lo + len * xi * xi;
        const double f1 = (tau - c) * (tau + c);
        const double sp = tau + delta;
        const double f2 = (sp - a) * (sp + a);
        const double p = f1 * f2;
        if (p <= 0.0) return 0.0;
        return 2.0 * len * xi / std::sqrt(p);
    };
    evals += 36;
    return gauss12(F, 0.0, 0.15) + gauss12(F, 0.15, 0.45) + gauss12(F, 0.45, 1.0);
}

// Gauss-Legendre 8 on [0,1] (half of the symmetric 8-point rule, reflected).
inline constexpr double g8x[4] = {0.183434642495650, 0.525532409916329, 0.796666477413627,
                                  0.960289856497536};
inline constexpr double g8w[4] = {0.362683783378362, 0.313706645877887, 0.222381034453374,
                                  0.101228536290376};

template <typename F>
inline double gauss8(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += g8w[i] * (f(c + h * g8x[i]) + f(c - h * g8x[i]));
    return s * h;
}

// Composite rule for a segment whose integrand blows up like log at one end:
// map phi = end -+ e^{-xi} and integrate the exponentially damped image over
// three fixed panels.
template <typename F>
double integrate_log_end(const F& f, double a, double b, bool sing_left) {
    const double w = b - a;
    if (w <= 0.0) return 0.0;
    const double xi0 = std::log(1.0 / w);
    auto g = [&](double xi) {
        const double off = std::exp(-xi);
        const double phi = sing_left ? a + off : b - off;
        return f(phi) * off;
    };
    return gauss8(g, xi0, xi0 + 3.0) + gauss8(g, xi0 + 3.0, xi0 + 9.0) +
           gauss8(g, xi0 + 9.0, xi0 + 34.0);
}

// Cos-graded composite Gauss over [a,b]: panel boundaries cluster toward both
// ends, absorbing sqrt-type endpoint behavior.
template <typename F>
double integrate_cos_graded(const F& f, double a, double b, int panels) {
    double total = 0.0;
    double prev = a;
    for (int j = 1; j <= panels; ++j) {
        const double x = a + (b - a) * 0.5 * (1.0 - std::cos(kPi * j / panels));
        total += gauss8(f, prev, x);
        prev = x;
    }
    return total;
}

// ---------------------------------------------------------------------------
// U(t1,t2,rho) = int_0^{t1} int G0(t1-s,y) G0(t2-s,y+rho e1) dy ds
//             = (1/(2 pi^2)) int_0^{t1} u int_0^pi J(u, v(u,phi), ...) dphi du
// with v = |y + rho e1|. The integrand carries a log singularity along the
// curve v = u + delta (both kernel radii binding at once) and dies where
// v >= t2 (no overlap yet). All rules are fixed and deterministic; the error
// estimate comes from re-integrating the u variable at half resolution.
struct UEvaluator {
    double t1, t2, delta, rho;
    mutable long evals = 0;

    double inner_J(double u, double phi) const {
        const double v = std::hypot(u + rho * std::cos(phi), rho * std::sin(phi));
        const double tau_lo = std::max(u, v - delta);
        if (tau_lo >= t1 * (1.0 - 1e-15)) return 0.0;
        return kernel_J(u, v, delta, tau_lo, t1, evals);
    }

    double phi_integral(double u) const {
        const double vmax = u + rho;
        const double vmin = std::fabs(u - rho);
        if (vmin >= t2 || u >= t1) return 0.0;
        double phi_dead = 0.0;
        if (vmax > t2) {
            const double carg = (t2 * t2 - u * u - rho * rho) / (2.0 * u * rho);
            phi_dead = std::acos(std::clamp(carg, -1.0, 1.0));
        }
        auto f = [&](double phi) { return inner_J(u, phi); };
        const double carg = (2.0 * u * delta + delta * delta - rho * rho) / (2.0 * u * rho);
        if (carg >= 1.0 || carg <= -1.0) {
            if (phi_dead >= kPi) return 0.0;
            return integrate_cos_graded(f, phi_dead, kPi, 6);
        }
        const double phi_star = std::acos(carg);
        if (phi_star <= phi_dead) return integrate_cos_graded(f, phi_dead, kPi, 6);
        double total = integrate_log_end(f, phi_star, kPi, /*sing_left=*/true);
        // left part: sqrt-type vanish at phi_dead, log blowup at phi_star
        const double mid = phi_dead + 0.75 * (phi_star - phi_dead);
        total += integrate_cos_graded(f, phi_dead, mid, 4);
        total += integrate_log_end(f, mid, phi_star, /*sing_left=*/false);
        return total;
    }

    QuadratureValue value() const {
        auto f = [&](double u) { return u * phi_integral(u); };
        std::vector<double> bps{0.0, t1};
        if (rho > delta && 0.5 * (rho - delta) < t1) bps.push_back(0.5 * (rho - delta));
        if (t2 - rho > 0.0 && t2 - rho < t1) bps.push_back(t2 - rho);
        if (rho - t2 > 0.0 && rho - t2 < t1) bps.push_back(rho - t2);
        std::sort(bps.begin(), bps.end());
        double fine = 0.0, coarse = 0.0;
        for (size_t i = 0; i + 1 < bps.size(); ++i) {
            if (bps[i + 1] - bps[i] < 1e-15 * t1) continue;
            fine += integrate_cos_graded(f, bps[i], bps[i + 1], 12);
            coarse += integrate_cos_graded(f, bps[i], bps[i + 1], 6);
        }
        const double scale = 1.0 / (2.0 * kPi * kPi);
        QuadratureValue out;
        out.value = fine * scale;
        out.abs_err = std::fabs(fine - coarse) * scale + 1e-16 * std::fabs(fine);
        out.evals = evals;
        return out;
    }
};

QuadratureValue evaluate_U(double t1, double t2, double rho, double /*abs_tol*/) {
    UEvaluator ev{t1, t2, t2 - t1, rho};
    return ev.value();
}

// natural cubic spline second derivatives
std::vector<double> spline_m2(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    std::vector<double> m2(n, 0.0), u(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
        const double sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
        const double p = sig * m2[i - 1] + 2.0;
        m2[i] = (sig - 1.0) / p;
        u[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
        u[i] = (6.0 * u[i] / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
    }
    for (size_t k = n - 1; k-- > 1;) m2[k] = m2[k] * m2[k + 1] + u[k];
    return m2;
}

double spline_at(const std::vector<double>& x, const std::vector<double>& y,
                 const std::vector<double>& m2, size_t lo, size_t hi, double xq) {
    size_t l = lo, h = hi;
    while (h - l > 1) {
        size_t m = (l + h) / 2;
        (x[m] > xq ? h : l) = m;
    }
    const double dx = x[h] - x[l];
    const double A = (x[h] - xq) / dx, B = (xq - x[l]) / dx;
    return A * y[l] + B * y[h] +
           ((A * A * A - A) * m2[l] + (B * B * B - B) * m2[h]) * dx * dx / 6.0;
}

} // namespace

// ---------------------------------------------------------------------------

QuadratureValue kernel_time_correlation(double t1, double t2, double rho, double abs_tol) {
    if (t1 > t2) std::swap(t1, t2);
    return evaluate_U(t1, t2, rho, abs_tol);
}

QuadratureValue time_kernel_exact(double a, double b, double s0, double s1, double tol) {
    if (!(a >= 0.0 && a <= b)) throw std::invalid_argument("time_kernel_exact: need 0 <= a <= b");
    if (!(b <= s0 && s0 < s1)) throw std::invalid_argument("time_kernel_exact: need b <= s0 < s1");
    if (a == b && s0 == b && b > 0.0)
        throw std::invalid_argument("time_kernel_exact: divergent at s0 = a = b");
    QuadratureValue out;
    if (b == 0.0) { // both radii degenerate: int s^-2 ds
        out.value = 1.0 / s0 - 1.0 / s1;
        return out;
    }
    const double d2 = (b - a) * (b + a);
    auto acosh_safe = [](double x) { return std::acosh(std::max(1.0, x)); };
    const double u0 = acosh_safe(s0 / b);
    const double u1 = acosh_safe(s1 / b);
    auto f = [&](double u) {
        const double sh = b * std::sinh(u);
        return 1.0 / std::sqrt(sh * sh + d2);
    };
    return integrate(f, u0, u1, tol);
}

std::pair<double, double> time_kernel_log_bounds(double a, double b, double s1) {
    if (!(a >= 0.0 && a < b && b < s1))
        throw std::invalid_argument("time_kernel_log_bounds: need 0 <= a < b < s1");
    const double ra = std::sqrt((s1 - a) * (s1 + a));
    const double rb = std::sqrt((s1 - b) * (s1 + b));
    const double num = (rb + ra) * (rb + ra);
    const double den = (b - a) * (b + a);
    const double L = std::log(num / den);
    return {L / (2.0 * s1), L / (2.0 * b)};
}

// ---------------------------------------------------------------------------

KernelProfile::KernelProfile(double t1, double t2, double node_tol) {
    if (t1 > t2) std::swap(t1, t2);
    if (!(t1 > 0.0)) throw std::invalid_argument("KernelProfile: need t1 > 0");
    t1_ = t1;
    t2_ = t2;
    delta_ = t2 - t1;
    rho_max_ = t1 + t2;
    rho_lo_ = rho_max_ * (delta_ == 0.0 ? 3e-5 : 1e-5);

    std::vector<double> rho;
    const int n_base = 110;
    // log grid over the body plus eps-geometric knots toward the support edge,
    // where U vanishes like (rho_max - rho)^{3/2}; the two interpolants overlap
    // so neither is used near its own boundary knots
    const double body_hi = rho_max_ * 0.85;
    const double xlo = std::log(rho_lo_), xhi = std::log(body_hi);
    for (int i = 0; i < n_base; ++i)
        rho.push_back(std::exp(xlo + (xhi - xlo) * i / (n_base - 1.0)));
    for (int j = 0; j <= 69; ++j)
        rho.push_back(rho_max_ * (1.0 - 0.45 * std::pow(2.0, -j / 4.0)));
    if (delta_ > rho_lo_ * 2.0 && delta_ < rho_max_ * 0.75) {
        rho.push_back(delta_);
        for (int j = 0; j < 8; ++j) {
            const double off = delta_ * std::pow(0.25, j + 1);
            if (delta_ - off > rho_lo_) rho.push_back(delta_ - off);
            if (delta_ + off < body_hi) rho.push_back(delta_ + off);
        }
    }
    std::sort(rho.begin(), rho.end());
    rho.erase(std::unique(rho.begin(), rho.end(),
                          [](double a, double b) { return std::fabs(a - b) < 1e-14 * b; }),
              rho.end());

    const size_t n = rho.size();
    std::vector<double> val(n), err(n);
    std::vector<long> ev(n);
    parallel_for(static_cast<long>(n), [&](long i) {
        auto q = evaluate_U(t1_, t2_, rho[i], node_tol);
        val[i] = q.value;
        err[i] = q.abs_err;
        ev[i] = q.evals;
    });
    double max_err = 0.0;
    for (size_t i = 0; i < n; ++i) {
        max_err = std::max(max_err, err[i]);
        evals_ += ev[i];
    }
    knot_rho_ = rho;
    knot_err_ = err;

    // overlapping interpolants: body spline on (ln p, U) for p below the
    // switch, edge spline on (ln eps, ln U) above it
    for (size_t i = 0; i < n; ++i) {
        if (rho[i] <= body_hi * (1.0 + 1e-12)) {
            x_.push_back(std::log(rho[i]));
            y_.push_back(val[i]);
        }
    }
    seg_split_ = 0;
    if (delta_ > rho_lo_ * 2.0 && delta_ < rho_max_ * 0.75) {
        auto it = std::lower_bound(x_.begin(), x_.end(), std::log(delta_) - 1e-13);
        seg_split_ = static_cast<size_t>(it - x_.begin());
    }
    m2_ = spline_m2(x_, y_); // kink handled by the clustered knots around delta

    tail_rho_ = rho_max_ * 0.70;
    for (size_t i = n; i-- > 0;) { // ascending in eps = rho_max - rho
        if (rho[i] < rho_max_ * 0.55 * (1.0 - 1e-12)) break;
        if (val[i] <= 0.0) continue;
        tx_.push_back(std::log(rho_max_ - rho[i]));
        ty_.push_back(std::log(val[i]));
    }
    tm2_ = spline_m2(tx_, ty_);

    // asymptote U ~ c1 ln(1/p) + c2 below the grid (equal times only)
    if (delta_ == 0.0) {
        const size_t nfit = 12;
        double sxx = 0, sx = 0, sy = 0, sxy = 0;
        for (size_t i = 0; i < nfit; ++i) {
            const double lx = -x_[i]; // ln(1/p)
            sxx += lx * lx;
            sx += lx;
            sy += y_[i];
            sxy += lx * y_[i];
        }
        const double det = nfit * sxx - sx * sx;
        c1_ = (nfit * sxy - sx * sy) / det;
        c2_ = (sy * sxx - sx * sxy) / det;
        double resid = 0.0;
        for (size_t i = 0; i < nfit; ++i)
            resid = std::max(resid, std::fabs(y_[i] - (c1_ * (-x_[i]) + c2_)));
        max_err += resid;
        for (size_t i = 0; i < nfit; ++i) knot_err_[i] += resid;
    } else {
        c1_ = 0.0;
        c2_ = y_.front();
    }
    err_ = max_err;
}

double KernelProfile::spline_eval(double lx) const {
    if (seg_split_ > 0) {
        const double split = x_[seg_split_];
        if (lx <= split) return spline_at(x_, y_, m2_, 0, seg_split_, lx);
        return spline_at(x_, y_, m2_, seg_split_, x_.size() - 1, lx);
    }
    return spline_at(x_, y_, m2_, 0, x_.size() - 1, lx);
}

double KernelProfile::error_at(double p) const {
    auto it = std::lower_bound(knot_rho_.begin(), knot_rho_.end(), p);
    double e = 0.0;
    if (it != knot_rho_.end()) e = knot_err_[it - knot_rho_.begin()];
    if (it != knot_rho_.begin()) e = std::max(e, knot_err_[it - knot_rho_.begin() - 1]);
    // small allowance for interpolation between knots
    return 1.5 * e + 1e-12;
}

double KernelProfile::operator()(double p) const {
    if (p >= rho_max_) return 0.0;
    if (p <= rho_lo_) {
        if (delta_ == 0.0) return c1_ * std::log(1.0 / p) + c2_;
        return c2_;
    }
    if (p > tail_rho_) {
        if (tx_.size() < 4) return y_.back() * (rho_max_ - p) / (rho_max_ - tail_rho_);
        const double le = std::log(rho_max_ - p);
        if (le <= tx_.front()) {
            // beyond the innermost edge knot: continue the local power law
            const double slope = (ty_[1] - ty_[0]) / (tx_[1] - tx_[0]);
            return std::exp(ty_.front() + slope * (le - tx_.front()));
        }
        return std::exp(spline_at(tx_, ty_, tm2_, 0, tx_.size() - 1, le));
    }
    return spline_eval(std::log(p));
}

std::shared_ptr<const KernelProfile> kernel_profile(double t1, double t2, double node_tol) {
    static std::mutex mtx;
    static std::map<std::tuple<double, double, double>, std::shared_ptr<const KernelProfile>> cache;
    if (t1 > t2) std::swap(t1, t2);
    const auto key = std::make_tuple(t1, t2, node_tol);
    {
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    auto prof = std::make_shared<const KernelProfile>(t1, t2, node_tol);
    std::lock_guard<std::mutex> lock(mtx);
    auto [it, inserted] = cache.emplace(key, prof);
    return it->second;
}

// ---------------------------------------------------------------------------

namespace {

void require_existence(const CovarianceModel& model) {
    if (classify_dalang(model).verdict != Verdict::Convergent)
        throw ExistenceError(
            "covariance fails the existence condition int_{0+} r ln(1/r) f(r) dr < inf "
            "(Dalang-type); the solution is distribution-valued only");
}

double profile_node_tol(double t2) { return 3e-7 * (1.0 + t2 * t2); }

QuadratureValue second_moment_direct(double t, const FlowConfig& cfg,
                                     const CovarianceModel& model, double rel_tol);

} // namespace

QuadratureValue second_moment(double t, const FlowConfig& cfg, const CovarianceModel& model,
                              double rel_tol, MomentRoute route) {
    if (!(t > 0.0 && t <= cfg.t0 * (1.0 + 1e-12)))
        throw std::invalid_argument("second_moment: need 0 < t <= t0");
    require_existence(model);
    if (route == MomentRoute::Direct) return second_moment_direct(t, cfg, model, rel_tol);

    auto prof = kernel_profile(t, t, profile_node_tol(t));
    auto q = radial_shell_integral(model, 2.0 * t, [&](double r) { return (*prof)(r); },
                                   rel_tol);
    auto qe = radial_shell_integral(model, 2.0 * t,
                                    [&](double r) { return prof->error_at(r); }, rel_tol);
    QuadratureValue out;
    out.value = 2.0 * kPi * q.value;
    out.abs_err = 2.0 * kPi * (q.abs_err + qe.value);
    out.evals = q.evals + prof->evals();
    out.converged = q.converged;
    return out;
}

QuadratureValue cross_moment(double t1, double t2, SpacePoint dx, const FlowConfig& cfg,
                             const CovarianceModel& model, double rel_tol) {
    if (t1 > t2) { // symmetric up to reversing the offset
        std::swap(t1, t2);
        dx = {-dx.x1, -dx.x2};
    }
    if (!(t1 > 0.0 && t2 <= cfg.t0 * (1.0 + 1e-12)))
        throw std::invalid_argument("cross_moment: need 0 < t1 <= t2 <= t0");
    require_existence(model);

    const double delta = t2 - t1;
    const SpacePoint d_eff{dx.x1 - cfg.mach * delta, dx.x2};
    const double D = std::hypot(d_eff.x1, d_eff.x2);
    auto prof = kernel_profile(t1, t2, profile_node_tol(t2));

    QuadratureValue out;
    if (D < 1e-14 * (t1 + t2)) {
        auto q = radial_shell_integral(model, t1 + t2, [&](double r) { return (*prof)(r); },
                                       rel_tol);
        auto qe = radial_shell_integral(model, t1 + t2,
                                        [&](double r) { return prof->error_at(r); }, rel_tol);
        out = q;
        out.value *= 2.0 * kPi;
        out.abs_err = 2.0 * kPi * (q.abs_err + qe.value);
    } else {
        Accum acc;
        auto theta_avg = [&](const auto& field) {
            return [&, field](double r) {
                // 2 int_0^pi field(g) dtheta, g = sqrt(r^2 + D^2 + 2 r D cos)
                auto g = [&](double th) {
                    return field(std::hypot(r + D * std::cos(th), D * std::sin(th)));
                };
                std::vector<double> bps;
                for (double s : {delta, prof->t1() + prof->t2()}) {
                    if (s <= 0.0) continue;
                    const double ca = (s * s - r * r - D * D) / (2.0 * r * D);
                    if (ca > -1.0 && ca < 1.0) bps.push_back(std::acos(ca));
                }
                auto q = integrate_split(g, 0.0, kPi, bps, 1e-9 * (1.0 + prof->t2()), 40000);
                acc.err += 2.0 * q.abs_err;
                acc.evals += q.evals;
                return 2.0 * q.value;
            };
        };
        auto q = radial_shell_integral(
            model, t1 + t2 + D, theta_avg([&](double p) { return (*prof)(p); }), rel_tol);
        auto qe = radial_shell_integral(
            model, t1 + t2 + D, theta_avg([&](double p) { return prof->error_at(p); }),
            rel_tol);
        out.value = q.value;
        out.abs_err = q.abs_err + qe.value + acc.err * 1e-2;
        out.evals = q.evals + acc.evals;
        out.converged = q.converged && acc.converged;
    }
    out.evals += prof->evals();
    return out;
}

QuadratureValue increment_moment(const IncrementSpec& spec, const FlowConfig& cfg,
                                 const CovarianceModel& model, double rel_tol) {
    if (!(spec.h > 0.0 && spec.h < cfg.t0))
        throw std::invalid_argument("increment_moment: need 0 < h < t0");
    if (!(spec.t > 0.0)) throw std::invalid_argument("increment_moment: need t > 0");
    const double inner_tol = rel_tol * 0.05;
    QuadratureValue out;
    if (spec.kind == IncrementSpec::Kind::TimeShift) {
        if (spec.t + spec.h > cfg.t0 * (1.0 + 1e-12))
            throw std::invalid_argument("increment_moment: t + h exceeds the horizon");
        auto a = second_moment(spec.t, cfg, model, inner_tol);
        auto b = second_moment(spec.t + spec.h, cfg, model, inner_tol);
        auto x = cross_moment(spec.t, spec.t + spec.h, {0.0, 0.0}, cfg, model, inner_tol);
        out.value = a.value + b.value - 2.0 * x.value;
        out.abs_err = a.abs_err + b.abs_err + 2.0 * x.abs_err;
        out.evals = a.evals + b.evals + x.evals;
        out.converged = a.converged && b.converged && x.converged;
    } else {
        if (spec.axis != 1 && spec.axis != 2)
            throw std::invalid_argument("increment_moment: axis must be 1 or 2");
        if (spec.t > cfg.t0 * (1.0 + 1e-12))
            throw std::invalid_argument("increment_moment: t exceeds the horizon");
        const SpacePoint dx = spec.axis == 1 ? SpacePoint{spec.h, 0.0} : SpacePoint{0.0, spec.h};
        auto a = second_moment(spec.t, cfg, model, inner_tol);
        auto x = cross_moment(spec.t, spec.t, dx, cfg, model, inner_tol);
        out.value = 2.0 * (a.value - x.value);
        out.abs_err = 2.0 * (a.abs_err + x.abs_err);
        out.evals = a.evals + x.evals;
        out.converged = a.converged && x.converged;
    }
    return out;
}

// ---------------------------------------------------------------------------

QuadratureValue modulus_bound(double t0, double h, const FlowConfig& cfg,
                              const CovarianceModel& model, double c1, double c2,
                              double rel_tol) {
    if (!(h > 0.0 && h < t0)) throw std::invalid_argument("modulus_bound: need 0 < h < t0");
    if (!(c1 > 0.0 && c2 > 0.0)) throw std::invalid_argument("modulus_bound: need C1, C2 > 0");
    const double m = cfg.mach;
    const double beta = cfg.beta();
    const double r_hi = 2.0 * std::sqrt((1.0 + m) / (1.0 - m)) * t0;
    const double w_hi = 2.0 * (1.0 + m) * t0;
    const double ln4t = std::log(4.0 * (1.0 + m) * t0);
    const double amp = c2 * t0 * std::sqrt(h);

    auto psi = [&](double r) {
        auto theta_int = [&](double w) {
            const double theta_lo = eta_inverse_clamped(w / (beta * r), cfg);
            if (theta_lo >= kPi / 2) return 0.0;
            auto f = [&](double th) {
                const double e = eta(th, cfg);
                const double arg = r * e * (w / beta - r * e);
                if (arg <= 0.0) return 0.0;
                return std::log1p(amp / arg);
            };
            return integrate_log_end(f, theta_lo, kPi / 2, /*sing_left=*/true);
        };
        auto wf = [&](double w) { return (ln4t - std::log(w)) * theta_int(w); };
        const double w_lo = r * std::sqrt(beta);
        if (w_lo >= w_hi) return 0.0;
        double total = 0.0;
        if (r > w_lo && r < w_hi) {
            total += integrate_cos_graded(wf, w_lo, r, 10);
            total += integrate_cos_graded(wf, r, w_hi, 10);
        } else {
            total += integrate_cos_graded(wf, w_lo, w_hi, 12);
        }
        return total;
    };
    auto shells = radial_shell_integral(model, r_hi, psi, rel_tol, 14, 200);
    QuadratureValue out;
    out.value = c1 * shells.value;
    out.abs_err = c1 * shells.abs_err;
    out.evals = shells.evals;
    out.converged = shells.converged;
    return out;
}

QuadratureValue theorem1_lower(double t, const CovarianceModel& model) {
    if (!(t > 0.0)) throw std::invalid_argument("theorem1_lower: need t > 0");
    return radial_shell_integral(model, t, [](double r) { return std::log(1.0 / r); }, 1e-7, 24,
                                 240);
}

QuadratureValue theorem1_upper(double t, const FlowConfig& cfg, const CovarianceModel& model,
                               double c4) {
    if (!(t > 0.0)) throw std::invalid_argument("theorem1_upper: need t > 0");
    const double r_hi = 2.0 * std::sqrt((1.0 + cfg.mach) / (1.0 - cfg.mach)) * t;
    return radial_shell_integral(model, r_hi,
                                 [c4](double r) { return std::log(1.0 / r) + c4; }, 1e-7, 24,
                                 240);
}

// ---------------------------------------------------------------------------
// Direct route: integrate the convected kernel verbatim, no frame reduction.
// E = int_0^t V(s) ds,  V(s) = int r f(r) [int_0^{2pi} Qhat(s, r e_th) dth] dr,
// Qhat(s,w) = int G(s,y,m) G(s,y+w,m) dy. The support boundary is located by
// bisection on the support predicate, never from the moving-frame identity.

namespace {

struct DirectValue {
    double value = 0.0;
    double err = 0.0;
};

DirectValue direct_Qhat(double s, double wx, double wy, const FlowConfig& cfg, long& evals) {
    auto inside = [&](double px, double py) {
        return support_contains(s, {px, py}, cfg);
    };
    const double reach = 2.0 * s / (1.0 - cfg.mach) + 1e-9;
    auto boundary_along = [&](double ox, double oy, double dx, double dy) {
        // first exit of the support along o + p (dx,dy), p in (0, reach]
        double lo = 0.0, hi = reach;
        if (inside(ox + hi * dx, oy + hi * dy)) return hi;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (inside(ox + mid * dx, oy + mid * dy) ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    if (!inside(0.0, 0.0)) return {};
    const double pp = boundary_along(0, 0, 1, 0);
    const double pm = boundary_along(0, 0, -1, 0);
    const double cx = 0.5 * (pp - pm);

    double ray_err_max = 0.0;
    auto ray_integral = [&](double chi) {
        const double dx = std::cos(chi), dy = std::sin(chi);
        const double P = boundary_along(cx, 0.0, dx, dy);
        if (P <= 0.0) return 0.0;
        // crossings of the second kernel's support along the ray
        std::vector<double> bps{0.0, P};
        auto in2 = [&](double p) { return inside(cx + p * dx + wx, p * dy + wy); };
        const int scan = 48;
        bool prev = in2(0.0);
        for (int i = 1; i <= scan; ++i) {
            const double p = P * i / scan;
            const bool cur = in2(p);
            if (cur != prev) {
                double lo = P * (i - 1) / scan, hi = p;
                for (int it = 0; it < 50; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (in2(mid) == prev ? lo : hi) = mid;
                }
                bps.push_back(0.5 * (lo + hi));
                prev = cur;
            }
        }
        std::sort(bps.begin(), bps.end());
        auto h = [&](double p) {
            const SpacePoint y{cx + p * dx, p * dy};
            const auto g1 = green(s, y, cfg);
            if (g1.value == 0.0) return 0.0;
            const auto g2 = green(s, {y.x1 + wx, y.x2 + wy}, cfg);
            return p * g1.value * g2.value;
        };
        double total = 0.0;
        for (size_t i = 0; i + 1 < bps.size(); ++i) {
            const double lo = bps[i], hi = bps[i + 1];
            if (hi - lo < 1e-14 * P) continue;
            if (!in2(0.5 * (lo + hi))) continue;
            // cos map absorbs the sqrt endpoints at both segment ends
            auto g = [&](double th) {
                const double p = 0.5 * (lo + hi) - 0.5 * (hi - lo) * std::cos(th);
                return h(p) * 0.5 * (hi - lo) * std::sin(th);
            };
            const double fine = gauss12(g, 0.0, kPi);
            const double mid = kPi / 2;
            const double check = gauss12(g, 0.0, mid) + gauss12(g, mid, kPi);
            ray_err_max = std::max(ray_err_max, std::fabs(check - fine));
            evals += 36;
            total += check;
        }
        return total;
    };
    auto q = integrate([&](double chi) { return ray_integral(chi); }, 0.0, 2.0 * kPi,
                       2e-4 / (1.0 + s), 300000);
    evals += q.evals;
    return {q.value, q.abs_err + ray_err_max * kPi};
}

QuadratureValue second_moment_direct(double t, const FlowConfig& cfg,
                                     const CovarianceModel& model, double rel_tol) {
    // fixed Gauss nodes in s so the V(s) evaluations parallelize
    struct Node {
        double s, w12, w6;
    };
    std::vector<Node> nodes;
    const double c = 0.5 * t, hl = 0.5 * t;
    for (int i = 0; i < 6; ++i) {
        const double x = detail::gl12_x[i], w = detail::gl12_w[i];
        nodes.push_back({c + hl * x, w, 0.0});
        nodes.push_back({c - hl * x, w, 0.0});
    }
    // embedded 6-point probe for the s-rule error estimate
    static const double g6x[3] = {0.238619186083197, 0.661209386466265, 0.932469514203152};
    static const double g6w[3] = {0.467913934572691, 0.360761573048139, 0.171324492379170};
    for (int i = 0; i < 3; ++i) {
        nodes.push_back({c + hl * g6x[i], 0.0, g6w[i]});
        nodes.push_back({c - hl * g6x[i], 0.0, g6w[i]});
    }

    std::vector<double> vs(nodes.size()), verr(nodes.size());
    std::vector<long> nev(nodes.size());
    parallel_for(static_cast<long>(nodes.size()), [&](long i) {
        const double s = nodes[i].s;
        long evals = 0;
        // memoized per-radius value and error fields so both can be shell-
        // integrated with the proper radial weights
        std::map<double, DirectValue> memo;
        auto fields_at = [&](double r) -> const DirectValue& {
            auto it = memo.find(r);
            if (it != memo.end()) return it->second;
            // 4-direction angular average; the spread doubles as an isotropy check
            double sum = 0.0, lo = 1e300, hi = -1e300, qerr = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double th = (k + 0.5) * kPi / 4.0;
                const auto q = direct_Qhat(s, r * std::cos(th), r * std::sin(th), cfg, evals);
                sum += q.value;
                qerr += q.err;
                lo = std::min(lo, q.value);
                hi = std::max(hi, q.value);
            }
            DirectValue dv;
            dv.value = 2.0 * (kPi / 4.0) * sum;
            dv.err = 2.0 * (kPi / 4.0) * qerr + 0.5 * (hi - lo) * kPi;
            return memo.emplace(r, dv).first->second;
        };
        auto q = radial_shell_integral(model, 2.0 * s,
                                       [&](double r) { return fields_at(r).value; },
                                       std::max(rel_tol, 1e-3), 12, 60);
        auto qe = radial_shell_integral(model, 2.0 * s,
                                        [&](double r) { return fields_at(r).err; },
                                        std::max(rel_tol, 1e-3), 12, 60);
        vs[i] = q.value;
        verr[i] = q.abs_err + qe.value;
        nev[i] = evals;
    });

    double i12 = 0.0, i6 = 0.0;
    QuadratureValue out;
    for (size_t i = 0; i < nodes.size(); ++i) {
        i12 += nodes[i].w12 * vs[i] * hl;
        i6 += nodes[i].w6 * vs[i] * hl;
        out.abs_err += verr[i] * nodes[i].w12 * hl;
        out.evals += nev[i];
    }
    out.value = i12;
    out.abs_err += std::fabs(i12 - i6);
    return out;
}

} // namespace

} // namespace convecta
