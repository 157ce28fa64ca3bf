#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "convecta/covariance.hpp"
#include "convecta/geometry.hpp"
#include "convecta/rng.hpp"

// Sampling of the spatially homogeneous, white-in-time noise increments on a
// grid of cells: Cov(dF(A), dF(B)) = dt * int_{A x B} f(||u-v||) du dv.
// Spatial factorization by circulant embedding on the doubled torus, with a
// dense eigendecomposition fallback for small grids when the embedding clips
// too much negative spectral mass.

namespace convecta {

struct GridSpec {
    double half_extent = 1.0; // grid covers [-L, L]^2
    int n = 2;                // cells per side, even

    GridSpec() = default;
    GridSpec(double L, int cells);
    double cell_size() const { return 2.0 * half_extent / n; }
    double center(int i) const { return -half_extent + (i + 0.5) * cell_size(); }
    // dependence-cone check for an evaluation point (t,x)
    bool covers_dependence(double t, SpacePoint x, const FlowConfig& cfg) const;
};

struct FieldIncrement {
    int n = 0;
    double dt = 0.0;
    std::vector<double> values; // row-major n x n cell-integrated increments
    double at(int i, int j) const { return values[static_cast<size_t>(i) * n + j]; }
};

class NoiseOperator {
  public:
    enum class Method { CirculantEmbedding, DenseFactorization };

    NoiseOperator(const GridSpec& grid, const CovarianceModel& model);

    const GridSpec& grid() const { return grid_; }
    Method method() const { return method_; }
    double clip_mass() const { return clip_mass_; }
    // exact cell-pair covariance used for the factorization (lag indices)
    double cell_covariance(int di, int dj) const;

    // One Gaussian field increment with covariance dt * C. Streams derived
    // from (seed, replicate, step) are independent across steps and
    // replicates and reproduce bit-identically for any thread count.
    FieldIncrement sample_increment(double dt, uint64_t master_seed, uint64_t replicate,
                                    uint64_t step) const;

    ~NoiseOperator();
    NoiseOperator(const NoiseOperator&) = delete;
    NoiseOperator& operator=(const NoiseOperator&) = delete;

  private:
    GridSpec grid_;
    Method method_ = Method::CirculantEmbedding;
    double clip_mass_ = 0.0;
    std::vector<double> lag_cov_;     // (n+1) x (n+1) lag table
    std::vector<double> sqrt_lambda_; // 2n x 2n torus spectrum, clipped
    std::vector<double> dense_root_;  // n^2 x n^2 symmetric square root (fallback)
    void* plan_ = nullptr;            // fftw plan for the 2n x 2n backward transform
    void build_circulant();
    bool build_dense();
};

struct LagEstimate {
    int di = 0, dj = 0;
    double cov = 0.0;
    double se = 0.0;
    double target = 0.0;
};

// Unbiased sample covariance per lag with standard errors; needs >= 1000
// draws. Targets are the operator's cell covariances scaled by dt.
std::vector<LagEstimate> empirical_covariance(const NoiseOperator& op,
                                              const std::vector<FieldIncrement>& draws,
                                              const std::vector<std::pair<int, int>>& lags);

// Binary field dump: 32-byte header (magic "CVWN", u32 version, u32 n, f64 dt,
// zero padding), then n*n row-major little-endian doubles.
void write_field_dump(const std::string& path, const FieldIncrement& field);
FieldIncrement read_field_dump(const std::string& path);

} // namespace convecta
