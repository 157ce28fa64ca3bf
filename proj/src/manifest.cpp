#include "convecta/manifest.hpp"

#include <charconv>

#include "convecta/simulator.hpp"

namespace convecta {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string canonical_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

uint64_t ensemble_config_hash(const std::vector<EvalPoint>& points, const FlowConfig& cfg,
                              const CovarianceModel& model, const Discretization& disc) {
    std::string s = "ensemble|";
    s += covariance_model_to_json(model);
    s += "|m=" + canonical_double(cfg.mach) + "|t0=" + canonical_double(cfg.t0);
    s += "|L=" + canonical_double(disc.grid.half_extent) +
         "|n=" + std::to_string(disc.grid.n) + "|dt=" + canonical_double(disc.dt) +
         "|reps=" + std::to_string(disc.replicates) +
         "|seed=" + std::to_string(disc.master_seed);
    for (const auto& p : points) {
        s += "|p=" + canonical_double(p.t) + "," + canonical_double(p.x.x1) + "," +
             canonical_double(p.x.x2);
    }
    return fnv1a64(s);
}

} // namespace convecta
