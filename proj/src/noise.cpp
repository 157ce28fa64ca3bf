#include "convecta/noise.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>
#include <Eigen/Dense>

#include "convecta/quadrature.hpp"

namespace convecta {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kClipLimit = 1e-3;
constexpr int kDenseMaxN = 64; // n^2 x n^2 eigendecomposition beyond this is not viable

std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

// overlap area of two discs of radius R with centers r apart
double disc_overlap(double r, double R) {
    if (r >= 2.0 * R) return 0.0;
    const double q = r / (2.0 * R);
    return 2.0 * R * R * std::acos(q) - 0.5 * r * std::sqrt(4.0 * R * R - r * r);
}

} // namespace

GridSpec::GridSpec(double L, int cells) : half_extent(L), n(cells) {
    if (!(L > 0.0)) throw std::invalid_argument("GridSpec: need half_extent > 0");
    if (cells < 2 || cells % 2 != 0)
        throw std::invalid_argument("GridSpec: need an even cell count >= 2");
}

bool GridSpec::covers_dependence(double t, SpacePoint x, const FlowConfig& cfg) const {
    const double m = cfg.mach;
    const double L = half_extent;
    return x.x1 - (1.0 + m) * t >= -L && x.x1 + (1.0 - m) * t <= L && x.x2 - t >= -L &&
           x.x2 + t <= L;
}

NoiseOperator::NoiseOperator(const GridSpec& grid, const CovarianceModel& model) : grid_(grid) {
    if (classify_base(model).verdict != Verdict::Convergent)
        throw std::invalid_argument(
            "noise operator: covariance must satisfy int_{0+} r f(r) dr < inf");
    const int n = grid_.n;
    const double h = grid_.cell_size();
    const double area = h * h;

    // cell-pair covariances: midpoint beyond two cells, 4x4 subcell averages
    // for close pairs, exact disc-equivalent average on the diagonal
    lag_cov_.assign(static_cast<size_t>(n + 1) * (n + 1), 0.0);
    for (int di = 0; di <= n; ++di) {
        for (int dj = 0; dj <= n; ++dj) {
            const double dist = h * std::hypot(static_cast<double>(di), static_cast<double>(dj));
            double c;
            if (di == 0 && dj == 0) {
                const double R = h / std::sqrt(kPi); // disc of equal area
                auto q = radial_shell_integral(
                    model, 2.0 * R, [&](double r) { return disc_overlap(r, R); }, 1e-9, 24, 240);
                c = 2.0 * kPi * q.value;
            } else if (dist < 2.0 * h) {
                double acc = 0.0;
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b)
                        for (int p = 0; p < 4; ++p)
                            for (int q = 0; q < 4; ++q) {
                                const double dx = di * h + (p - a) * h / 4.0;
                                const double dy = dj * h + (q - b) * h / 4.0;
                                acc += model.eval(std::hypot(dx, dy));
                            }
                c = acc / 256.0 * area * area;
            } else {
                c = model.eval(dist) * area * area;
            }
            lag_cov_[static_cast<size_t>(di) * (n + 1) + dj] = c;
        }
    }

    build_circulant();
    if (clip_mass_ > kClipLimit) {
        if (n > kDenseMaxN)
            throw std::invalid_argument(
                "noise operator: embedding clipped too much spectral mass and the grid is too "
                "large for the dense fallback");
        if (!build_dense())
            throw std::invalid_argument("noise operator: dense factorization failed");
        method_ = Method::DenseFactorization;
    }
}

NoiseOperator::~NoiseOperator() {
    if (plan_) {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(static_cast<fftw_plan>(plan_));
    }
}

double NoiseOperator::cell_covariance(int di, int dj) const {
    di = std::abs(di);
    dj = std::abs(dj);
    if (di > grid_.n || dj > grid_.n) throw std::invalid_argument("cell_covariance: lag range");
    return lag_cov_[static_cast<size_t>(di) * (grid_.n + 1) + dj];
}

void NoiseOperator::build_circulant() {
    const int n = grid_.n;
    const int N = 2 * n;
    std::vector<std::complex<double>> w(static_cast<size_t>(N) * N);
    for (int p = 0; p < N; ++p) {
        const int dp = std::min(p, N - p);
        for (int q = 0; q < N; ++q) {
            const int dq = std::min(q, N - q);
            w[static_cast<size_t>(p) * N + q] = lag_cov_[static_cast<size_t>(dp) * (n + 1) + dq];
        }
    }
    std::vector<std::complex<double>> spec(w.size());
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan fp = fftw_plan_dft_2d(N, N, reinterpret_cast<fftw_complex*>(w.data()),
                                        reinterpret_cast<fftw_complex*>(spec.data()),
                                        FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_execute(fp);
        fftw_destroy_plan(fp);
        plan_ = fftw_plan_dft_2d(N, N, reinterpret_cast<fftw_complex*>(w.data()),
                                 reinterpret_cast<fftw_complex*>(spec.data()), FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    double neg = 0.0, tot = 0.0;
    sqrt_lambda_.resize(spec.size());
    for (size_t i = 0; i < spec.size(); ++i) {
        const double l = spec[i].real();
        tot += std::fabs(l);
        if (l < 0.0) neg += -l;
        sqrt_lambda_[i] = std::sqrt(std::max(0.0, l));
    }
    clip_mass_ = tot > 0.0 ? neg / tot : 0.0;
}

bool NoiseOperator::build_dense() {
    const int n = grid_.n;
    const int M = n * n;
    Eigen::MatrixXd C(M, M);
    for (int a = 0; a < M; ++a) {
        const int ai = a / n, aj = a % n;
        for (int b = a; b < M; ++b) {
            const int bi = b / n, bj = b % n;
            const double c = cell_covariance(ai - bi, aj - bj);
            C(a, b) = c;
            C(b, a) = c;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.info() != Eigen::Success) return false;
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd root = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    dense_root_.assign(root.data(), root.data() + static_cast<size_t>(M) * M);
    return true;
}

FieldIncrement NoiseOperator::sample_increment(double dt, uint64_t master_seed,
                                               uint64_t replicate, uint64_t step) const {
    if (dt < 0.0) throw std::invalid_argument("sample_increment: need dt >= 0");
    const int n = grid_.n;
    FieldIncrement out;
    out.n = n;
    out.dt = dt;
    out.values.assign(static_cast<size_t>(n) * n, 0.0);
    if (dt == 0.0) return out;
    const double sdt = std::sqrt(dt);
    RandomStream noise_stream =
        RandomStream(master_seed).child(0x4E4F4953ull).child(replicate);

    if (method_ == Method::DenseFactorization) {
        const int M = n * n;
        RandomStream s = noise_stream.child(step);
        std::vector<double> z(M);
        for (int i = 0; i < M; ++i) z[i] = s.normal(i);
        for (int a = 0; a < M; ++a) {
            double acc = 0.0;
            const double* row = dense_root_.data() + static_cast<size_t>(a) * M;
            for (int b = 0; b < M; ++b) acc += row[b] * z[b];
            out.values[a] = acc * sdt;
        }
        return out;
    }

    // circulant: one transform yields two independent fields (real and
    // imaginary parts), consumed by consecutive steps
    const int N = 2 * n;
    const size_t NN = static_cast<size_t>(N) * N;
    const uint64_t t_idx = step / 2;
    const bool use_imag = (step % 2) != 0;
    RandomStream s = noise_stream.child(t_idx);
    thread_local std::vector<std::complex<double>> in, outc;
    in.resize(NN);
    outc.resize(NN);
    for (size_t k = 0; k < NN; ++k) {
        in[k] = sqrt_lambda_[k] *
                std::complex<double>(s.normal(2 * k), s.normal(2 * k + 1));
    }
    fftw_execute_dft(static_cast<fftw_plan>(plan_),
                     reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(outc.data()));
    const double scale = sdt / std::sqrt(static_cast<double>(NN));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const auto& z = outc[static_cast<size_t>(i) * N + j];
            out.values[static_cast<size_t>(i) * n + j] =
                scale * (use_imag ? z.imag() : z.real());
        }
    }
    return out;
}

std::vector<LagEstimate> empirical_covariance(const NoiseOperator& op,
                                              const std::vector<FieldIncrement>& draws,
                                              const std::vector<std::pair<int, int>>& lags) {
    if (draws.size() < 1000)
        throw std::invalid_argument("empirical_covariance: need at least 1000 draws");
    const int n = op.grid().n;
    std::vector<LagEstimate> out;
    for (auto [di, dj] : lags) {
        if (di < 0 || dj < 0 || di >= n || dj >= n)
            throw std::invalid_argument("empirical_covariance: lag outside the grid");
        double sum = 0.0, sum2 = 0.0;
        for (const auto& d : draws) {
            double acc = 0.0;
            long cnt = 0;
            for (int i = 0; i + di < n; ++i)
                for (int j = 0; j + dj < n; ++j) {
                    acc += d.at(i, j) * d.at(i + di, j + dj);
                    ++cnt;
                }
            sum += acc / cnt;
            sum2 += (acc / cnt) * (acc / cnt);
        }
        const double mean = sum / draws.size();
        const double var = std::max(0.0, sum2 / draws.size() - mean * mean);
        LagEstimate e;
        e.di = di;
        e.dj = dj;
        e.cov = mean;
        e.se = std::sqrt(var / draws.size());
        e.target = op.cell_covariance(di, dj) * draws.front().dt;
        out.push_back(e);
    }
    return out;
}

void write_field_dump(const std::string& path, const FieldIncrement& field) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_field_dump: cannot open " + path);
    char header[32] = {0};
    std::memcpy(header, "CVWN", 4);
    const uint32_t version = 1;
    const uint32_t n = static_cast<uint32_t>(field.n);
    std::memcpy(header + 4, &version, 4);
    std::memcpy(header + 8, &n, 4);
    std::memcpy(header + 12, &field.dt, 8);
    f.write(header, 32);
    f.write(reinterpret_cast<const char*>(field.values.data()),
            static_cast<std::streamsize>(field.values.size() * sizeof(double)));
}

FieldIncrement read_field_dump(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_field_dump: cannot open " + path);
    char header[32];
    f.read(header, 32);
    if (!f || std::memcmp(header, "CVWN", 4) != 0)
        throw std::runtime_error("read_field_dump: bad magic");
    uint32_t version, n;
    FieldIncrement out;
    std::memcpy(&version, header + 4, 4);
    std::memcpy(&n, header + 8, 4);
    std::memcpy(&out.dt, header + 12, 8);
    if (version != 1) throw std::runtime_error("read_field_dump: unsupported version");
    out.n = static_cast<int>(n);
    out.values.resize(static_cast<size_t>(n) * n);
    f.read(reinterpret_cast<char*>(out.values.data()),
           static_cast<std::streamsize>(out.values.size() * sizeof(double)));
    if (!f) throw std::runtime_error("read_field_dump: truncated file");
    return out;
}

} // namespace convecta
