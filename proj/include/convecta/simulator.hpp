#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convecta/covariance.hpp"
#include "convecta/geometry.hpp"
#include "convecta/noise.hpp"

// Monte Carlo realization of the mild solution
//   X(t,x) = int_{(0,t] x R^2} G(t-s, x-y, m) dF(s,y)
// by discretized stochastic convolution: noise increments live at midpoint
// times s_j = (j-1/2) dt and the kernel is integrated exactly in the radial
// direction over wavefront-crossing cells. One noise realization is shared by
// all evaluation points of a replicate, so joint laws (and structure
// functions) come out right.

namespace convecta {

struct Discretization {
    GridSpec grid;
    double dt = 0.0;
    int replicates = 0;
    uint64_t master_seed = 0;

    Discretization() = default;
    Discretization(GridSpec g, double step, int reps, uint64_t seed);
};

struct EvalPoint {
    double t = 0.0;
    SpacePoint x;
};

struct EnsembleResult {
    std::vector<EvalPoint> points;
    int replicates = 0;
    std::vector<double> samples; // replicates x points, row-major
    uint64_t master_seed = 0;
    uint64_t config_hash = 0;
    std::string version;

    double at(int rep, int point) const {
        return samples[static_cast<size_t>(rep) * points.size() + point];
    }
};

// int_cell G(t_lag, x - y, m) dy. Interior cells use midpoint * area; cells
// near or across the wavefront get the exact radial integral of the classical
// kernel in the moving frame over the cell's radial footprint.
double green_cell_weight(double t_lag, SpacePoint x, SpacePoint cell_lo, SpacePoint cell_hi,
                         const FlowConfig& cfg);

// Refuses models failing the existence condition; every point's domain of
// dependence must sit inside the grid and every t must be a multiple of dt.
EnsembleResult simulate_ensemble(const std::vector<EvalPoint>& points, const FlowConfig& cfg,
                                 const CovarianceModel& model, const Discretization& disc);

// Straight serial loop over replicates; kept as the reference path for tests
// and the benchmark (bit-identical to simulate_ensemble by construction).
EnsembleResult simulate_ensemble_reference(const std::vector<EvalPoint>& points,
                                           const FlowConfig& cfg, const CovarianceModel& model,
                                           const Discretization& disc);

// One replicate evaluated at every grid center (plot-ready field).
FieldIncrement simulate_field_snapshot(double t, const FlowConfig& cfg,
                                       const CovarianceModel& model, const Discretization& disc);

} // namespace convecta
