#include "convecta/simulator.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

#include "convecta/manifest.hpp"
#include "convecta/parallel.hpp"
#include "convecta/quad_rules.hpp"
#include "convecta/quadrature.hpp"

namespace convecta {

namespace {

constexpr double kPi = std::numbers::pi;

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

// [r_in, r_out] of the ray p * (c,s) through an axis-aligned box, slab method
bool ray_box(double c, double s, const SpacePoint& lo, const SpacePoint& hi, double& r_in,
             double& r_out) {
    r_in = 0.0;
    r_out = 1e300;
    for (int ax = 0; ax < 2; ++ax) {
        const double d = ax == 0 ? c : s;
        const double l = ax == 0 ? lo.x1 : lo.x2;
        const double h = ax == 0 ? hi.x1 : hi.x2;
        if (std::fabs(d) < 1e-300) {
            if (l > 0.0 || h < 0.0) return false;
            continue;
        }
        double a = l / d, b = h / d;
        if (a > b) std::swap(a, b);
        r_in = std::max(r_in, a);
        r_out = std::min(r_out, b);
    }
    return r_out > r_in && r_out > 0.0;
}

} // namespace

Discretization::Discretization(GridSpec g, double step, int reps, uint64_t seed)
    : grid(g), dt(step), replicates(reps), master_seed(seed) {
    if (!(dt > 0.0)) throw std::invalid_argument("Discretization: need dt > 0");
    if (dt > grid.cell_size() / 4.0 * (1.0 + 1e-12))
        throw std::invalid_argument(
            "Discretization: need dt <= cell_size/4 to resolve wavefront crossing");
    if (replicates < 2) throw std::invalid_argument("Discretization: need >= 2 replicates");
}

double green_cell_weight(double t_lag, SpacePoint x, SpacePoint cell_lo, SpacePoint cell_hi,
                         const FlowConfig& cfg) {
    if (!(t_lag > 0.0)) throw std::invalid_argument("green_cell_weight: need t_lag > 0");
    // moving frame: integrate the classical kernel over the box
    //   u in [x1 - m l - yhi1, x1 - m l - ylo1] x [x2 - yhi2, x2 - ylo2]
    const double sx = x.x1 - cfg.mach * t_lag;
    const SpacePoint lo{sx - cell_hi.x1, x.x2 - cell_hi.x2};
    const SpacePoint hi{sx - cell_lo.x1, x.x2 - cell_lo.x2};
    const double cx[2] = {lo.x1, hi.x1};
    const double cy[2] = {lo.x2, hi.x2};
    double dmax = 0.0;
    for (double a : cx)
        for (double b : cy) dmax = std::max(dmax, std::hypot(a, b));
    const double ex = std::max({lo.x1 > 0 ? lo.x1 : 0.0, -hi.x1 > 0 ? -hi.x1 : 0.0});
    const double ey = std::max({lo.x2 > 0 ? lo.x2 : 0.0, -hi.x2 > 0 ? -hi.x2 : 0.0});
    const double dmin = std::hypot(ex, ey);
    if (dmin >= t_lag) return 0.0;

    const double diag = std::hypot(hi.x1 - lo.x1, hi.x2 - lo.x2);
    const double area = (hi.x1 - lo.x1) * (hi.x2 - lo.x2);
    if (dmax <= t_lag - 2.0 * diag) {
        const double mx = 0.5 * (lo.x1 + hi.x1), my = 0.5 * (lo.x2 + hi.x2);
        const double disc = (t_lag - std::hypot(mx, my)) * (t_lag + std::hypot(mx, my));
        return area / (2.0 * kPi * std::sqrt(disc));
    }

    // exact radial integral of 1/(2 pi sqrt(l^2-r^2)) over the box footprint:
    // int r dr / sqrt(l^2-r^2) = sqrt(l^2-r_in^2) - sqrt(l^2-r_out^2)
    auto g = [&](double th) {
        double r_in, r_out;
        if (!ray_box(std::cos(th), std::sin(th), lo, hi, r_in, r_out)) return 0.0;
        if (r_in >= t_lag) return 0.0;
        r_out = std::min(r_out, t_lag);
        const double a = std::sqrt((t_lag - r_in) * (t_lag + r_in));
        const double b = std::sqrt((t_lag - r_out) * (t_lag + r_out));
        return a - b;
    };
    std::vector<double> corners;
    for (double a : cx)
        for (double b : cy) corners.push_back(std::atan2(b, a));
    for (double& th : corners)
        if (th < 0.0) th += 2.0 * kPi;
    auto q = integrate_split(g, 0.0, 2.0 * kPi, corners, 1e-11 * (1.0 + t_lag), 20000);
    return q.value / (2.0 * kPi);
}

namespace {

struct LagTable {
    int i0 = 0, j0 = 0, ni = 0, nj = 0;
    std::vector<double> w; // ni x nj
};

struct SimPlan {
    std::vector<int> steps_of_point;
    std::vector<int> x_of_point; // index into distinct x list
    std::vector<SpacePoint> xs;
    int max_steps = 0;
    // tables[x][k-1] for lag (k-1/2) dt
    std::vector<std::vector<LagTable>> tables;
};

SimPlan prepare(const std::vector<EvalPoint>& points, const FlowConfig& cfg,
                const CovarianceModel& model, const Discretization& disc) {
    if (classify_dalang(model).verdict != Verdict::Convergent)
        throw ExistenceError(
            "no real-valued solution: the covariance fails the existence condition "
            "int_{0+} r ln(1/r) f(r) dr < inf");
    if (points.empty()) throw std::invalid_argument("simulate: no evaluation points");
    SimPlan plan;
    const double dt = disc.dt;
    for (const auto& p : points) {
        if (!(p.t >= 0.0 && p.t <= cfg.t0 * (1.0 + 1e-12)))
            throw std::invalid_argument("simulate: point time outside [0, t0]");
        const double kf = p.t / dt;
        const int k = static_cast<int>(std::llround(kf));
        if (std::fabs(k * dt - p.t) > 1e-9 * std::max(1.0, p.t))
            throw std::invalid_argument("simulate: point times must be multiples of dt");
        if (p.t > 0.0 && !disc.grid.covers_dependence(p.t, p.x, cfg))
            throw std::invalid_argument(
                "simulate: the grid does not contain the point's domain of dependence");
        plan.steps_of_point.push_back(k);
        plan.max_steps = std::max(plan.max_steps, k);
        int xi = -1;
        for (size_t i = 0; i < plan.xs.size(); ++i) {
            if (plan.xs[i].x1 == p.x.x1 && plan.xs[i].x2 == p.x.x2) {
                xi = static_cast<int>(i);
                break;
            }
        }
        if (xi < 0) {
            xi = static_cast<int>(plan.xs.size());
            plan.xs.push_back(p.x);
        }
        plan.x_of_point.push_back(xi);
    }

    const int n = disc.grid.n;
    const double h = disc.grid.cell_size();
    const double L = disc.grid.half_extent;
    plan.tables.assign(plan.xs.size(), std::vector<LagTable>(plan.max_steps));
    const long total = static_cast<long>(plan.xs.size()) * plan.max_steps;
    parallel_for(total, [&](long idx) {
        const size_t xi = idx / plan.max_steps;
        const int k = static_cast<int>(idx % plan.max_steps);
        const SpacePoint x = plan.xs[xi];
        const double lag = (k + 0.5) * dt;
        LagTable tab;
        const double y1_lo = x.x1 - (1.0 + cfg.mach) * lag, y1_hi = x.x1 + (1.0 - cfg.mach) * lag;
        const double y2_lo = x.x2 - lag, y2_hi = x.x2 + lag;
        tab.i0 = std::max(0, static_cast<int>(std::floor((y1_lo + L) / h)) - 1);
        tab.j0 = std::max(0, static_cast<int>(std::floor((y2_lo + L) / h)) - 1);
        const int i1 = std::min(n - 1, static_cast<int>(std::floor((y1_hi + L) / h)) + 1);
        const int j1 = std::min(n - 1, static_cast<int>(std::floor((y2_hi + L) / h)) + 1);
        tab.ni = std::max(0, i1 - tab.i0 + 1);
        tab.nj = std::max(0, j1 - tab.j0 + 1);
        tab.w.assign(static_cast<size_t>(tab.ni) * tab.nj, 0.0);
        // cell-averaged kernel: the increments are cell-integrated masses
        const double inv_area = 1.0 / (h * h);
        for (int i = 0; i < tab.ni; ++i) {
            const double c1 = disc.grid.center(tab.i0 + i);
            for (int j = 0; j < tab.nj; ++j) {
                const double c2 = disc.grid.center(tab.j0 + j);
                tab.w[static_cast<size_t>(i) * tab.nj + j] =
                    inv_area * green_cell_weight(lag, x, {c1 - h / 2, c2 - h / 2},
                                                 {c1 + h / 2, c2 + h / 2}, cfg);
            }
        }
        plan.tables[xi][k] = std::move(tab);
    });
    return plan;
}

double table_dot(const LagTable& tab, const FieldIncrement& f) {
    double acc = 0.0;
    for (int i = 0; i < tab.ni; ++i) {
        const double* wrow = tab.w.data() + static_cast<size_t>(i) * tab.nj;
        const double* frow = f.values.data() + static_cast<size_t>(tab.i0 + i) * f.n + tab.j0;
        for (int j = 0; j < tab.nj; ++j) acc += wrow[j] * frow[j];
    }
    return acc;
}

template <typename Loop>
EnsembleResult run_ensemble(const std::vector<EvalPoint>& points, const FlowConfig& cfg,
                            const CovarianceModel& model, const Discretization& disc,
                            Loop&& loop) {
    SimPlan plan = prepare(points, cfg, model, disc);
    NoiseOperator op(disc.grid, model);
    EnsembleResult res;
    res.points = points;
    res.replicates = disc.replicates;
    res.master_seed = disc.master_seed;
    res.version = kToolVersion;
    res.config_hash = ensemble_config_hash(points, cfg, model, disc);
    res.samples.assign(static_cast<size_t>(disc.replicates) * points.size(), 0.0);

    loop(disc.replicates, [&](long rep) {
        std::vector<double> acc(points.size(), 0.0);
        for (int j = 1; j <= plan.max_steps; ++j) {
            const FieldIncrement f =
                op.sample_increment(disc.dt, disc.master_seed, static_cast<uint64_t>(rep),
                                    static_cast<uint64_t>(j - 1));
            for (size_t p = 0; p < points.size(); ++p) {
                const int sp = plan.steps_of_point[p];
                if (j > sp) continue;
                const int klag = sp - j; // lag (klag + 1/2) dt
                acc[p] += table_dot(plan.tables[plan.x_of_point[p]][klag], f);
            }
        }
        for (size_t p = 0; p < points.size(); ++p)
            res.samples[static_cast<size_t>(rep) * points.size() + p] = acc[p];
    });
    return res;
}

} // namespace

EnsembleResult simulate_ensemble(const std::vector<EvalPoint>& points, const FlowConfig& cfg,
                                 const CovarianceModel& model, const Discretization& disc) {
    return run_ensemble(points, cfg, model, disc,
                        [](int n, auto&& body) { parallel_for(n, body); });
}

EnsembleResult simulate_ensemble_reference(const std::vector<EvalPoint>& points,
                                           const FlowConfig& cfg, const CovarianceModel& model,
                                           const Discretization& disc) {
    return run_ensemble(points, cfg, model, disc,
                        [](int n, auto&& body) { serial_for(n, body); });
}

FieldIncrement simulate_field_snapshot(double t, const FlowConfig& cfg,
                                       const CovarianceModel& model, const Discretization& disc) {
    if (classify_dalang(model).verdict != Verdict::Convergent)
        throw ExistenceError(
            "no real-valued solution: the covariance fails the existence condition "
            "int_{0+} r ln(1/r) f(r) dr < inf");
    if (!(t >= 0.0 && t <= cfg.t0 * (1.0 + 1e-12)))
        throw std::invalid_argument("snapshot: need 0 <= t <= t0");
    const int n = disc.grid.n;
    const double h = disc.grid.cell_size();
    const double dt = disc.dt;
    const int steps = static_cast<int>(std::llround(t / dt));
    if (std::fabs(steps * dt - t) > 1e-9 * std::max(1.0, t))
        throw std::invalid_argument("snapshot: t must be a multiple of dt");

    FieldIncrement out;
    out.n = n;
    out.dt = dt;
    out.values.assign(static_cast<size_t>(n) * n, 0.0);
    if (steps == 0) return out;

    NoiseOperator op(disc.grid, model);
    const int N = 2 * n;
    const size_t NN = static_cast<size_t>(N) * N;

    // per-lag convolution kernels in Fourier space
    std::vector<std::vector<std::complex<double>>> khat(steps);
    fftw_plan fwd, bwd;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        std::vector<std::complex<double>> tmp(NN), tmp2(NN);
        fwd = fftw_plan_dft_2d(N, N, reinterpret_cast<fftw_complex*>(tmp.data()),
                               reinterpret_cast<fftw_complex*>(tmp2.data()), FFTW_FORWARD,
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
        bwd = fftw_plan_dft_2d(N, N, reinterpret_cast<fftw_complex*>(tmp.data()),
                               reinterpret_cast<fftw_complex*>(tmp2.data()), FFTW_BACKWARD,
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    parallel_for(steps, [&](long k) {
        const double lag = (k + 0.5) * dt;
        std::vector<std::complex<double>> ker(NN, 0.0);
        const int reach = std::min(n - 1, static_cast<int>(std::ceil(lag * 2.0 / ((1.0 - cfg.mach) * h))) + 1);
        for (int di = -reach; di <= reach; ++di) {
            for (int dj = -reach; dj <= reach; ++dj) {
                const double w = green_cell_weight(
                    lag, {di * h, dj * h}, {-h / 2, -h / 2}, {h / 2, h / 2}, cfg);
                if (w != 0.0)
                    ker[static_cast<size_t>((di + N) % N) * N + ((dj + N) % N)] = w / (h * h);
            }
        }
        std::vector<std::complex<double>> kh(NN);
        fftw_execute_dft(fwd, reinterpret_cast<fftw_complex*>(ker.data()),
                         reinterpret_cast<fftw_complex*>(kh.data()));
        khat[k] = std::move(kh);
    });

    std::vector<std::complex<double>> fpad(NN), fh(NN), prod(NN), conv(NN);
    for (int j = 1; j <= steps; ++j) {
        const FieldIncrement f = op.sample_increment(dt, disc.master_seed, 0, j - 1);
        std::fill(fpad.begin(), fpad.end(), std::complex<double>(0.0));
        for (int i = 0; i < n; ++i)
            for (int jj = 0; jj < n; ++jj)
                fpad[static_cast<size_t>(i) * N + jj] = f.at(i, jj);
        fftw_execute_dft(fwd, reinterpret_cast<fftw_complex*>(fpad.data()),
                         reinterpret_cast<fftw_complex*>(fh.data()));
        const auto& kh = khat[steps - j]; // lag (steps - j + 1/2) dt
        for (size_t i = 0; i < NN; ++i) prod[i] = kh[i] * fh[i];
        fftw_execute_dft(bwd, reinterpret_cast<fftw_complex*>(prod.data()),
                         reinterpret_cast<fftw_complex*>(conv.data()));
        const double scale = 1.0 / static_cast<double>(NN);
        for (int i = 0; i < n; ++i)
            for (int jj = 0; jj < n; ++jj)
                out.values[static_cast<size_t>(i) * n + jj] +=
                    scale * conv[static_cast<size_t>(i) * N + jj].real();
    }
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
    }
    return out;
}

} // namespace convecta
