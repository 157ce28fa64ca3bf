#pragma once

#include <vector>

#include "convecta/covariance.hpp"
#include "convecta/quadrature.hpp"
#include "convecta/simulator.hpp"

// Moment statistics, structure functions and the log-log slope fit that
// bounds the Holder exponent.

namespace convecta {

struct MomentStats {
    double mean = 0.0;
    double var = 0.0; // unbiased
    double se_mean = 0.0;
    double se_var = 0.0; // Gaussian fourth-moment formula
};

MomentStats moments(const EnsembleResult& ens, int point);

struct StructureRow {
    double h = 0.0;
    double s2 = 0.0;
    double se = 0.0;
    long n_pairs = 0;
};

struct StructureTable {
    IncrementSpec::Kind kind = IncrementSpec::Kind::TimeShift;
    int axis = 1;
    double base_t = 0.0;
    std::vector<StructureRow> rows; // ascending h
};

// Per-h mean of squared increments across replicates; the ensemble must
// contain the shifted points (shared noise per replicate).
StructureTable structure_function(const EnsembleResult& ens, int base_point,
                                  IncrementSpec::Kind kind, int axis,
                                  const std::vector<double>& h_list);

// Quadrature twin of the MC structure function (oracle table).
StructureTable structure_function_quadrature(double t, IncrementSpec::Kind kind, int axis,
                                             const std::vector<double>& h_list,
                                             const FlowConfig& cfg, const CovarianceModel& model,
                                             double rel_tol = 1e-4);

struct HolderFit {
    double slope = 0.0;
    double slope_ci_half = 0.0; // 95% half-width
    double intercept = 0.0;
    double holder_estimate = 0.0; // slope / 2 (moment-exponent proxy)
    HolderBand band_predicted;
};

// Weighted least squares on (ln h, ln S2) with weights SE^-2 (of ln S2).
HolderFit holder_fit(const StructureTable& tab, const CovarianceModel& model);

} // namespace convecta
