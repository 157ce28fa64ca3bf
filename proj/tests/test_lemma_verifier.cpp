#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "convecta/lemma_verifier.hpp"
#include "convecta/quadrature.hpp"

using namespace convecta;

TEST_CASE("shifted-kernel comparison: degenerate shift gives equality") {
    // eps = 0 makes both sides identical (C = 1 suffices); checked through the
    // exact kernel directly
    const double a = 0.5, b = 1.0, c = 0.2;
    auto lhs = time_kernel_exact(c, a, a, b, 1e-12);
    auto rhs = time_kernel_exact(c, a, a, b, 1e-12);
    CHECK(lhs.value == rhs.value);
}

TEST_CASE("lemma 2.2 suite: single example and 10^4 draws") {
    // a=0.5, b=1, c=0.2, eps=0.1: LHS <= C RHS with C = max(sqrt2, sqrt((c+eps)/c))
    const double a = 0.5, b = 1.0, c = 0.2, eps = 0.1;
    auto f = [&](double t) {
        const double g1 = (t - eps) * (t - eps) - c * c;
        const double g2 = t * t - a * a;
        return (g1 > 0 && g2 > 0) ? 1.0 / std::sqrt(g1 * g2) : 0.0;
    };
    auto xi = [&](double x) { // endpoint-absorbing map t = a + (b+eps-a) x^2
        const double t = a + (b + eps - a) * x * x;
        return f(t) * 2.0 * (b + eps - a) * x;
    };
    auto lhs = integrate(xi, 0.0, 1.0, 1e-12);
    auto rhs = time_kernel_exact(c + eps, a, a, b + eps, 1e-12);
    const double C = std::max(std::sqrt(2.0), std::sqrt((c + eps) / c));
    CHECK(lhs.value <= C * rhs.value * (1 + 1e-10));

    auto rep = check_lemma_2_2(10000, 12345);
    CHECK(rep.draws == 10000);
    CHECK(rep.violations == 0);
    CHECK(rep.worst_margin <= 1e-12);
    // seed-reproducible
    auto rep2 = check_lemma_2_2(10000, 12345);
    CHECK(rep.worst_margin == rep2.worst_margin);
    CHECK_THROWS_AS(check_lemma_2_2(10, 1), std::invalid_argument);
}

TEST_CASE("lemma 3.1 suite: degenerate equality, example, 10^4 draws") {
    // a = b: LHS = 0 and RHS = (1/(2 sqrt(b))) ln(1) = 0
    {
        const double b = 0.8, c = 0.3, t = 1.2;
        const double q = (b - b) / (b - c);
        CHECK(std::log1p(q + 2 * std::sqrt(q)) == 0.0);
        (void)t;
    }
    // positive-margin example
    {
        const double a = 0.5, b = 0.8, c = 0.3, t = 1.0;
        auto f = [&](double s) {
            const double s2 = s * s;
            return (1.0 / std::sqrt(s2 - b) - 1.0 / std::sqrt(s2 - a)) / std::sqrt(s2 - c);
        };
        // integrable 1/sqrt blowup at sqrt(b): x^2 map
        const double s0 = std::sqrt(b);
        auto xi = [&](double x) {
            const double s = s0 + (t - s0) * x * x;
            return f(s) * 2.0 * (t - s0) * x;
        };
        auto lhs = integrate(xi, 1e-9, 1.0, 1e-11);
        const double q = (b - a) / (b - c);
        const double rhs = std::log1p(q + 2 * std::sqrt(q)) / (2 * std::sqrt(b));
        CHECK(lhs.value < rhs);
        CHECK(rhs - lhs.value > 0.01 * rhs);
    }
    auto rep = check_lemma_3_1(10000, 777);
    CHECK(rep.violations == 0);
    CHECK(rep.recorded.at("antiderivative_points") == 100.0);
    auto rep2 = check_lemma_3_1(10000, 777);
    CHECK(rep.worst_margin == rep2.worst_margin);
}

TEST_CASE("theorem 2.1 sandwich across the power-law family") {
    FlowConfig cfg(0.0, 1.0);
    std::vector<CovarianceModel> family{CovarianceModel::power_law(0.5),
                                        CovarianceModel::power_law(1.0),
                                        CovarianceModel::power_law(1.5)};
    auto rep = check_theorem1_sandwich(family, 0.25, cfg);
    CHECK(rep.passed());
    CHECK(rep.recorded.at("K") < 50.0);

    // singleton passes trivially
    auto rep1 = check_theorem1_sandwich({CovarianceModel::constant(1.0)}, 0.25, cfg);
    CHECK(rep1.passed());

    // the reduced moment is frame invariant, so the verdict matches at m=0.5
    FlowConfig cfg2(0.5, 1.0);
    auto rep1b = check_theorem1_sandwich(family, 0.25, cfg2);
    CHECK(rep1b.passed() == rep.passed());
}

TEST_CASE("remark 2 vanishing modulus") {
    FlowConfig cfg(0.5, 1.0);
    auto rep = check_remark2_limit(CovarianceModel::power_law(1.0), cfg, 0.25);
    INFO("final/initial = ", rep.recorded.at("final_over_initial"),
         " fitted c2 = ", rep.recorded.at("c2"));
    CHECK(rep.violations == 0);
    auto repc = check_remark2_limit(CovarianceModel::constant(1.0), cfg, 0.25);
    CHECK(repc.violations == 0);
}
