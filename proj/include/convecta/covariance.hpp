#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

// Radial covariance models f(||x||) and integrability classifiers for the
// three conditions that drive everything else:
//   base:    int_{0+} r f(r) dr            (standing assumption)
//   dalang:  int_{0+} r ln(1/r) f(r) dr    (existence of a real-valued solution)
//   holder:  int_{0+} f(r) r^{1-alpha} dr  (path regularity band)

namespace convecta {

enum class Verdict { Convergent, Divergent, Inconclusive };

struct Classification {
    Verdict verdict = Verdict::Inconclusive;
    std::optional<double> value;      // integral over (0, 1], present iff Convergent
    std::vector<double> shell_sums;   // dyadic-shell diagnostics (empty if analytic only)
};

struct HolderBand {
    double lo = 0.0;
    double hi = 0.0; // sup(admissible alpha)/4
    bool empty = true;
};

class CovarianceModel {
  public:
    enum class Kind { PowerLaw, Constant, Exponential, LogBoundary, Custom };

    static CovarianceModel power_law(double alpha_f);
    static CovarianceModel constant(double level);
    static CovarianceModel exponential(double scale);
    static CovarianceModel log_boundary(double scale);
    // Radial functions outside the parametric family; classified by shell
    // quadrature only, not serializable.
    static CovarianceModel custom(std::function<double(double)> f, std::string name);

    double eval(double r) const; // rejects r <= 0
    Kind kind() const { return kind_; }
    double param() const { return param_; }
    const std::string& name() const { return name_; }

  private:
    CovarianceModel(Kind k, double p, std::string name);
    Kind kind_;
    double param_;
    std::string name_;
    std::function<double(double)> fn_;
};

Classification classify_base(const CovarianceModel& model);
Classification classify_dalang(const CovarianceModel& model);
Classification classify_holder(const CovarianceModel& model, double alpha);
HolderBand max_holder_band(const CovarianceModel& model);

// Shell machinery without the model-aware analytic shortcuts; used to
// cross-check the analytic verdicts.
Classification classify_base_by_shells(const CovarianceModel& model);
Classification classify_dalang_by_shells(const CovarianceModel& model);
Classification classify_holder_by_shells(const CovarianceModel& model, double alpha);

// JSON wire format, e.g. {"kind":"power_law","alpha_f":1.0}
CovarianceModel covariance_model_from_json(const std::string& text);
std::string covariance_model_to_json(const CovarianceModel& model);

} // namespace convecta
