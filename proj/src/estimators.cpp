#include "convecta/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace convecta {

MomentStats moments(const EnsembleResult& ens, int point) {
    const int n = ens.replicates;
    if (n < 2) throw std::invalid_argument("moments: need at least 2 replicates");
    double mean = 0.0;
    for (int r = 0; r < n; ++r) mean += ens.at(r, point);
    mean /= n;
    double ss = 0.0;
    for (int r = 0; r < n; ++r) {
        const double d = ens.at(r, point) - mean;
        ss += d * d;
    }
    MomentStats out;
    out.mean = mean;
    out.var = ss / (n - 1);
    out.se_mean = std::sqrt(out.var / n);
    out.se_var = out.var * std::sqrt(2.0 / (n - 1));
    return out;
}

namespace {

int find_point(const EnsembleResult& ens, double t, SpacePoint x) {
    for (size_t i = 0; i < ens.points.size(); ++i) {
        const auto& p = ens.points[i];
        if (std::fabs(p.t - t) <= 1e-12 * std::max(1.0, std::fabs(t)) &&
            std::fabs(p.x.x1 - x.x1) <= 1e-12 * std::max(1.0, std::fabs(x.x1)) &&
            std::fabs(p.x.x2 - x.x2) <= 1e-12 * std::max(1.0, std::fabs(x.x2)))
            return static_cast<int>(i);
    }
    return -1;
}

} // namespace

StructureTable structure_function(const EnsembleResult& ens, int base_point,
                                  IncrementSpec::Kind kind, int axis,
                                  const std::vector<double>& h_list) {
    if (base_point < 0 || base_point >= static_cast<int>(ens.points.size()))
        throw std::invalid_argument("structure_function: bad base point");
    const EvalPoint base = ens.points[base_point];
    StructureTable tab;
    tab.kind = kind;
    tab.axis = axis;
    tab.base_t = base.t;
    std::vector<double> hs = h_list;
    std::sort(hs.begin(), hs.end());
    for (double h : hs) {
        StructureRow row;
        row.h = h;
        row.n_pairs = ens.replicates;
        if (h == 0.0) {
            tab.rows.push_back(row);
            continue;
        }
        EvalPoint shifted = base;
        if (kind == IncrementSpec::Kind::TimeShift) {
            shifted.t += h;
        } else if (axis == 1) {
            shifted.x.x1 += h;
        } else {
            shifted.x.x2 += h;
        }
        const int q = find_point(ens, shifted.t, shifted.x);
        if (q < 0)
            throw std::invalid_argument("structure_function: shifted point missing from ensemble");
        double mean = 0.0, ss = 0.0;
        for (int r = 0; r < ens.replicates; ++r) {
            const double d = ens.at(r, q) - ens.at(r, base_point);
            mean += d * d;
        }
        mean /= ens.replicates;
        for (int r = 0; r < ens.replicates; ++r) {
            const double d = ens.at(r, q) - ens.at(r, base_point);
            const double e = d * d - mean;
            ss += e * e;
        }
        row.s2 = mean;
        row.se = std::sqrt(ss / ens.replicates / std::max(1, ens.replicates - 1));
        tab.rows.push_back(row);
    }
    return tab;
}

StructureTable structure_function_quadrature(double t, IncrementSpec::Kind kind, int axis,
                                             const std::vector<double>& h_list,
                                             const FlowConfig& cfg, const CovarianceModel& model,
                                             double rel_tol) {
    StructureTable tab;
    tab.kind = kind;
    tab.axis = axis;
    tab.base_t = t;
    std::vector<double> hs = h_list;
    std::sort(hs.begin(), hs.end());
    for (double h : hs) {
        StructureRow row;
        row.h = h;
        row.n_pairs = 0;
        if (h > 0.0) {
            IncrementSpec spec;
            spec.kind = kind;
            spec.axis = axis;
            spec.h = h;
            spec.t = t;
            auto q = increment_moment(spec, cfg, model, rel_tol);
            row.s2 = q.value;
            row.se = q.abs_err;
        }
        tab.rows.push_back(row);
    }
    return tab;
}

HolderFit holder_fit(const StructureTable& tab, const CovarianceModel& model) {
    std::vector<double> lx, ly, w;
    for (const auto& row : tab.rows) {
        if (row.h <= 0.0 || row.s2 <= 0.0) continue;
        lx.push_back(std::log(row.h));
        ly.push_back(std::log(row.s2));
        // Var(ln S2) ~ (SE/S2)^2
        const double sigma = row.se > 0.0 ? row.se / row.s2 : 1.0;
        w.push_back(1.0 / (sigma * sigma));
    }
    if (lx.size() < 4) throw std::invalid_argument("holder_fit: need at least 4 usable rows");
    const double span = *std::max_element(lx.begin(), lx.end()) -
                        *std::min_element(lx.begin(), lx.end());
    if (span < 2.0 * std::log(2.0) * (1.0 - 1e-12))
        throw std::invalid_argument("holder_fit: h must span at least two octaves");

    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sw += w[i];
        swx += w[i] * lx[i];
        swy += w[i] * ly[i];
        swxx += w[i] * lx[i] * lx[i];
        swxy += w[i] * lx[i] * ly[i];
    }
    const double det = sw * swxx - swx * swx;
    if (!(det > 0.0)) throw std::invalid_argument("holder_fit: degenerate h spacing");
    HolderFit fit;
    fit.slope = (sw * swxy - swx * swy) / det;
    fit.intercept = (swxx * swy - swx * swxy) / det;
    fit.slope_ci_half = 1.96 * std::sqrt(sw / det);
    fit.holder_estimate = 0.5 * fit.slope;
    fit.band_predicted = max_holder_band(model);
    return fit;
}

} // namespace convecta
