// Timing harness comparing the serial reference paths against the OpenMP
// kernels (same math, disjoint work units, deterministic reductions), and
// verifying they produce identical bits while at it.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "convecta/lemma_verifier.hpp"
#include "convecta/parallel.hpp"
#include "convecta/quadrature.hpp"
#include "convecta/simulator.hpp"

using namespace convecta;
using clk = std::chrono::steady_clock;

namespace {

double seconds_since(clk::time_point t0) {
    return std::chrono::duration<double>(clk::now() - t0).count();
}

template <typename F>
double timed(F&& f) {
    const auto t0 = clk::now();
    f();
    return seconds_since(t0);
}

} // namespace

int main(int argc, char** argv) {
    int threads = max_threads();
    if (argc > 1) threads = std::atoi(argv[1]);
    std::printf("comparing serial reference vs OpenMP kernels (%d threads)\n\n", threads);

    // ensemble simulation
    {
        FlowConfig cfg(0.5, 0.5);
        auto model = CovarianceModel::power_law(1.0);
        GridSpec grid(1.5, 64);
        Discretization disc(grid, grid.cell_size() / 4, 128, 42);
        const double t = 32 * disc.dt;
        std::vector<EvalPoint> pts{{t, {0.0, 0.0}}, {t, {0.1875, 0.0}}};

        EnsembleResult serial, parallel;
        const double ts = timed([&] { serial = simulate_ensemble_reference(pts, cfg, model, disc); });
        set_max_threads(threads);
        const double tp = timed([&] { parallel = simulate_ensemble(pts, cfg, model, disc); });
        const bool same = serial.samples == parallel.samples;
        std::printf("simulate_ensemble   serial %7.3f s   parallel %7.3f s   speedup %4.2fx   %s\n",
                    ts, tp, ts / tp, same ? "bit-identical" : "MISMATCH");
    }

    // lemma verification draws
    {
        set_max_threads(1);
        VerificationReport serial, parallel;
        const double ts = timed([&] { serial = check_lemma_2_2(20000, 7); });
        set_max_threads(threads);
        const double tp = timed([&] { parallel = check_lemma_2_2(20000, 7); });
        const bool same = serial.violations == parallel.violations &&
                          serial.worst_margin == parallel.worst_margin;
        std::printf("check_lemma_2_2     serial %7.3f s   parallel %7.3f s   speedup %4.2fx   %s\n",
                    ts, tp, ts / tp, same ? "bit-identical" : "MISMATCH");
    }

    // kernel profile construction (second-moment workhorse)
    {
        set_max_threads(1);
        double v1 = 0.0, v2 = 0.0;
        const double ts = timed([&] {
            KernelProfile prof(0.75, 0.75, 3e-7);
            v1 = prof(0.3);
        });
        set_max_threads(threads);
        const double tp = timed([&] {
            KernelProfile prof(0.75, 0.75, 3e-7);
            v2 = prof(0.3);
        });
        std::printf("kernel profile      serial %7.3f s   parallel %7.3f s   speedup %4.2fx   %s\n",
                    ts, tp, ts / tp, v1 == v2 ? "bit-identical" : "MISMATCH");
    }
    return 0;
}
