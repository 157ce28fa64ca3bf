#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convecta/covariance.hpp"
#include "convecta/geometry.hpp"

// Reproducibility manifests: every stochastic output is a pure function of
// the canonical config string hashed here, so replaying a manifest (at any
// thread count) reproduces the samples bit-identically.

namespace convecta {

inline constexpr const char* kToolVersion = "convecta 0.1.0";

struct Discretization;
struct EvalPoint;

uint64_t fnv1a64(const std::string& s);

std::string canonical_double(double v); // shortest round-trip decimal

uint64_t ensemble_config_hash(const std::vector<EvalPoint>& points, const FlowConfig& cfg,
                              const CovarianceModel& model, const Discretization& disc);

} // namespace convecta
