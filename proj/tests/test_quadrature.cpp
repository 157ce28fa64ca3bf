#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "convecta/quadrature.hpp"
#include "convecta/rng.hpp"
#include "oracles.hpp"

using namespace convecta;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("time_kernel_exact: degenerate and closed-form cases") {
    auto z = time_kernel_exact(0, 0, 1, 2);
    CHECK(z.value == doctest::Approx(0.5).epsilon(1e-14)); // int s^-2 ds on (1,2)

    // a = b: partial fractions give (1/(2b)) ln((s-b)/(s+b))
    auto pf = time_kernel_exact(0.5, 0.5, 0.6, 1.5);
    const double exact = (std::log((1.5 - 0.5) / (1.5 + 0.5)) -
                          std::log((0.6 - 0.5) / (0.6 + 0.5))) / (2 * 0.5);
    CHECK(pf.value == doctest::Approx(exact).epsilon(1e-10));
    CHECK(pf.converged);

    // endpoint singularity at s0 = b against a brute-force eps -> 0 oracle
    auto tk = time_kernel_exact(0.3, 0.6, 0.6, 1.0);
    auto brute = [](double eps) {
        auto f = [](double s) {
            return 1.0 / std::sqrt((s * s - 0.09) * (s * s - 0.36));
        };
        return integrate(f, 0.6 + eps, 1.0, 1e-13).value;
    };
    // tail of the omitted (0.6, 0.6+eps) piece behaves like 2 sqrt(eps)/k
    const double i1 = brute(1e-6), i2 = brute(2.5e-7);
    const double extrap = i2 + (i2 - i1) / (1.0 - std::sqrt(1e-6 / 2.5e-7)) *
                                   (std::sqrt(2.5e-7) / (std::sqrt(1e-6) - std::sqrt(2.5e-7)));
    // Richardson in sqrt(eps): I(eps) ~ I0 - c sqrt(eps)
    const double c = (i1 - i2) / (std::sqrt(1e-6) - std::sqrt(2.5e-7));
    const double i0 = i1 - c * std::sqrt(1e-6);
    (void)extrap;
    CHECK(tk.value == doctest::Approx(i0).epsilon(1e-8));

    CHECK_THROWS_AS(time_kernel_exact(0.7, 0.6, 0.6, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(time_kernel_exact(0.3, 0.6, 0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(time_kernel_exact(0.3, 0.6, 0.7, 0.65), std::invalid_argument);
    CHECK_THROWS_AS(time_kernel_exact(0.5, 0.5, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("time_kernel_log_bounds sandwich on random admissible triples") {
    RandomStream rs(31);
    for (int i = 0; i < 10000; ++i) {
        const double b = rs.log_uniform(3 * i, 1e-3, 1.0);
        const double a = b * rs.uniform(3 * i + 1);
        const double s1 = b * (1.0 + rs.log_uniform(3 * i + 2, 1e-3, 3.0));
        if (a >= b * (1 - 1e-9)) continue;
        auto [lo, hi] = time_kernel_log_bounds(a, b, s1);
        auto exact = time_kernel_exact(a, b, b, s1, 1e-11);
        CHECK(lo <= exact.value * (1 + 1e-9) + exact.abs_err);
        CHECK(exact.value <= hi * (1 + 1e-9) + exact.abs_err);
    }
    CHECK_THROWS_AS(time_kernel_log_bounds(0.6, 0.6, 1.0), std::invalid_argument);
}

TEST_CASE("log bound tracks the divergence rate as b -> s1") {
    // upper ~ -(1/(2b)) ln(b^2-a^2) while the exact integral diverges at the
    // same logarithmic rate: their ratio stays bounded
    const double s1 = 1.0, a = 0.0;
    for (double frac : {0.9, 0.99, 0.999}) {
        const double b = frac * s1;
        auto [lo, hi] = time_kernel_log_bounds(a, b, s1);
        auto exact = time_kernel_exact(a, b, b, s1, 1e-11);
        CHECK(hi / exact.value < 3.0);
        CHECK(hi / exact.value >= 1.0);
        CHECK(lo / exact.value <= 1.0);
        CHECK(lo / exact.value > 0.2);
    }
    // near-degenerate a -> b stays finite
    auto [lo, hi] = time_kernel_log_bounds(0.5 - 1e-9, 0.5, 1.0);
    CHECK(std::isfinite(hi));
    CHECK(hi > 0.0);
    (void)lo;
}

TEST_CASE("kernel profile: constant-covariance identity and asymptote") {
    // 2 pi int r U(t,t,r) dr = t^3/3
    for (double t : {0.5, 1.0}) {
        FlowConfig cfg(0.0, 2.0);
        auto q = second_moment(t, cfg, CovarianceModel::constant(1.0), 1e-4);
        CHECK(q.converged);
        CHECK(q.value == doctest::Approx(t * t * t / 3.0).epsilon(1e-4));
    }
    // leading log coefficient of U(t,t,.) near 0 is t/(4 pi)
    auto prof = kernel_profile(1.0, 1.0, 3e-7);
    CHECK(prof->asymptote_c1() == doctest::Approx(1.0 / (4 * kPi)).epsilon(0.02));
}

TEST_CASE("second_moment: power-law against the brute-force MC oracle") {
    FlowConfig cfg(0.0, 2.0);
    auto pl = CovarianceModel::power_law(1.0);
    auto q = second_moment(1.0, cfg, pl, 1e-4);
    CHECK(q.converged);
    auto mc = oracles::second_moment_mc(1.0, pl, 12000000, 4242);
    CHECK(std::fabs(q.value - mc.value) < 3.0 * (mc.err + q.abs_err));
}

TEST_CASE("second_moment refuses models without a real-valued solution") {
    FlowConfig cfg(0.0, 2.0);
    CHECK_THROWS_AS(second_moment(1.0, cfg, CovarianceModel::log_boundary(1.0), 1e-4),
                    ExistenceError);
    CHECK_THROWS_AS(second_moment(0.0, cfg, CovarianceModel::constant(1.0), 1e-4),
                    std::invalid_argument);
    CHECK_THROWS_AS(second_moment(3.0, cfg, CovarianceModel::constant(1.0), 1e-4),
                    std::invalid_argument);
}

TEST_CASE("cross_moment basics") {
    FlowConfig cfg(0.5, 2.0);
    auto pl = CovarianceModel::power_law(1.0);
    auto a = cross_moment(1.0, 1.0, {0, 0}, cfg, pl, 1e-4);
    auto b = second_moment(1.0, cfg, pl, 1e-4);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-8));

    // symmetric under dx -> -dx at equal times (isotropy of the reduction)
    auto c1 = cross_moment(1.0, 1.0, {0.125, 0}, FlowConfig(0.0, 2.0), pl, 1e-4);
    auto c2 = cross_moment(1.0, 1.0, {-0.125, 0}, FlowConfig(0.0, 2.0), pl, 1e-4);
    CHECK(c1.value == doctest::Approx(c2.value).epsilon(1e-9));

    // m = 0.5 time pair against the m = 0 oracle at the effective offset
    auto cm = cross_moment(1.0, 1.1, {0, 0}, cfg, pl, 1e-4);
    auto mc = oracles::cross_moment_mc(1.0, 1.1, 0.05, pl, 12000000, 777);
    CHECK(std::fabs(cm.value - mc.value) < 3.0 * (mc.err + cm.abs_err));
}

TEST_CASE("increment_moment: decrease, isotropy, triangle relation") {
    FlowConfig cfg(0.0, 2.0);
    auto pl = CovarianceModel::power_law(1.0);
    double prev = 1e300;
    for (double h : {0.2, 0.1, 0.05}) {
        IncrementSpec spec{IncrementSpec::Kind::TimeShift, h, 1, 1.0};
        auto q = increment_moment(spec, cfg, pl, 1e-4);
        CHECK(q.value >= -q.abs_err);
        CHECK(q.value < prev);
        prev = q.value;
    }
    auto s1 = increment_moment({IncrementSpec::Kind::SpaceShift, 0.1, 1, 1.0}, cfg, pl, 1e-4);
    auto s2 = increment_moment({IncrementSpec::Kind::SpaceShift, 0.1, 2, 1.0}, cfg, pl, 1e-4);
    CHECK(s1.value == doctest::Approx(s2.value).epsilon(1e-10));

    // E|X(t)-X(t+2h)|^2 <= 2 E|X(t)-X(t+h)|^2 + 2 E|X(t+h)-X(t+2h)|^2
    const double h = 0.1;
    auto d2 = increment_moment({IncrementSpec::Kind::TimeShift, 2 * h, 1, 1.0}, cfg, pl, 1e-4);
    auto da = increment_moment({IncrementSpec::Kind::TimeShift, h, 1, 1.0}, cfg, pl, 1e-4);
    auto db = increment_moment({IncrementSpec::Kind::TimeShift, h, 1, 1.0 + h}, cfg, pl, 1e-4);
    CHECK(d2.value <=
          2.0 * da.value + 2.0 * db.value + 3.0 * (d2.abs_err + da.abs_err + db.abs_err));

    CHECK_THROWS_AS(increment_moment({IncrementSpec::Kind::TimeShift, 3.0, 1, 1.0}, cfg, pl),
                    std::invalid_argument);
    CHECK_THROWS_AS(increment_moment({IncrementSpec::Kind::SpaceShift, 0.1, 3, 1.0}, cfg, pl),
                    std::invalid_argument);
}

TEST_CASE("modulus_bound: monotone in h and in C2, rejects bad h") {
    FlowConfig cfg(0.5, 1.0);
    auto pl = CovarianceModel::power_law(1.0);
    double prev = 0.0;
    for (double h : {0.01, 0.04, 0.16}) {
        auto b = modulus_bound(1.0, h, cfg, pl, 1.0, 1.0, 1e-3);
        CHECK(b.value > prev);
        prev = b.value;
    }
    auto b1 = modulus_bound(1.0, 0.04, cfg, pl, 1.0, 1.0, 1e-3);
    auto b2 = modulus_bound(1.0, 0.04, cfg, pl, 1.0, 2.0, 1e-3);
    CHECK(b2.value > b1.value);
    CHECK_THROWS_AS(modulus_bound(1.0, 0.0, cfg, pl, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(modulus_bound(1.0, 2.0, cfg, pl, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("theorem1 bracket integrals") {
    auto pl = CovarianceModel::power_law(1.0);
    auto lo = theorem1_lower(0.25, pl);
    CHECK(lo.value > 0.0);
    // f = 1/r makes the lower integral int_0^t ln(1/r) dr = t (1 + ln(1/t))
    CHECK(lo.value == doctest::Approx(0.25 * (1.0 + std::log(4.0))).epsilon(1e-6));
    auto c = CovarianceModel::constant(1.0);
    for (double t : {0.25, 0.5, 1.0}) {
        CHECK(std::isfinite(theorem1_lower(t, c).value));
        CHECK(std::isfinite(theorem1_upper(t, FlowConfig(0.0, 1.0), c, 1.0).value));
    }
    // sandwich ratios bounded across the family at fixed t
    FlowConfig cfg(0.0, 1.0);
    for (double af : {0.5, 1.0, 1.5}) {
        auto m = CovarianceModel::power_law(af);
        const double e = second_moment(0.25, cfg, m, 1e-4).value;
        const double rl = e / theorem1_lower(0.25, m).value;
        const double ru = e / theorem1_upper(0.25, cfg, m, 1.0).value;
        CHECK(rl > 1.0 / 50.0);
        CHECK(rl < 50.0);
        CHECK(ru > 1.0 / 50.0);
        CHECK(ru < 50.0);
    }
}

TEST_CASE("deterministic re-evaluation") {
    FlowConfig cfg(0.0, 2.0);
    auto pl = CovarianceModel::power_law(1.0);
    auto a = second_moment(1.0, cfg, pl, 1e-4);
    auto b = second_moment(1.0, cfg, pl, 1e-4);
    CHECK(a.value == b.value);
    CHECK(a.abs_err == b.abs_err);
    auto t1 = time_kernel_exact(0.3, 0.6, 0.6, 1.0);
    auto t2 = time_kernel_exact(0.3, 0.6, 0.6, 1.0);
    CHECK(t1.value == t2.value);
}
