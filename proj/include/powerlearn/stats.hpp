#pragma once

// Primitive statistics: standard-normal distribution functions, Welch-style
// z-scores for single metrics and linear metric combinations, p-values, and the
// per-experiment multiple-treatment and always-valid-inference corrections.
//
// Covariance convention: every matrix is the covariance of the *sample mean*
// (already divided by the sample count). Sample counts are carried only for
// the always-valid-inference correction.
//
// All functions are pure and thread-safe.

#include <Eigen/Core>
#include <cstdint>
#include <span>

namespace powerlearn {

/// One variant's metric means and the covariance of those means.
struct VariantStats {
    Eigen::VectorXd means;
    Eigen::MatrixXd cov;
    std::int64_t n_samples = 0;

    Eigen::Index dimension() const noexcept { return means.size(); }
};

/// Checks dimensions, finiteness and sample count, symmetrises the covariance
/// and lifts tiny negative eigenvalues (above -1e-9 * trace / N) to zero.
/// Throws ValidationError naming the violated rule.
void validate_and_repair(VariantStats& stats);

/// Acceptable false-positive rate, strictly inside (0, 1).
class SignificanceLevel {
public:
    explicit SignificanceLevel(double alpha);
    double value() const noexcept { return alpha_; }
    friend bool operator==(SignificanceLevel, SignificanceLevel) = default;

private:
    double alpha_;
};

/// Per-experiment z corrections. Applied in the order raw -> Bonferroni -> AVI.
struct CorrectionPolicy {
    bool bonferroni_over_treatments = true;
    bool avi = false;
    SignificanceLevel alpha{0.05};
};

/// Smallest p-value ever returned; keeps downstream logarithms finite.
inline constexpr double kPValueFloor = 1e-300;

double std_normal_pdf(double z);

/// Phi(z), through erfc so that the lower tail keeps full relative precision.
double std_normal_cdf(double z);

/// Upper tail mass 1 - Phi(z) evaluated directly (no subtraction from one).
double std_normal_sf(double z);

/// Inverse of Phi on (0, 1): rational approximation refined by a Halley step.
double std_normal_ppf(double p);

/// (mu_i^A - mu_i^B) / sqrt(var_i^A + var_i^B).
double z_score_metric(const VariantStats& a, const VariantStats& b, std::size_t metric);

/// z-score of the linear metric mu . w; w spans all N metrics.
double linear_metric_z(const VariantStats& a, const VariantStats& b, std::span<const double> w);

/// 2 min(Phi(z), 1 - Phi(z)), clamped to [kPValueFloor, 1].
double two_tailed_p(double z);

/// One-tailed p of the null "A is not better than B": 1 - Phi(z) evaluated
/// literally in double precision, clamped to [kPValueFloor, 1]. The result is
/// quantised to the spacing of doubles just below one for large positive z;
/// use std_normal_sf where the exact upper tail is needed.
double one_tailed_p(double z);

/// Multiplicative factor Phi^-1(alpha/2) / Phi^-1(alpha/(2T)).
double bonferroni_factor(std::int64_t treatments, SignificanceLevel alpha);
double bonferroni_corrected_z(double z, std::int64_t treatments, SignificanceLevel alpha);

/// rho(alpha) = 10000 / (log(log(e / alpha^2)) - 2 log(alpha)).
double avi_rho(SignificanceLevel alpha);
/// 1 / sqrt(((N + rho) / N) log((N + rho) / (rho alpha^2))).
double avi_factor(std::int64_t n_total, SignificanceLevel alpha);
double avi_corrected_z(double z, std::int64_t n_total, SignificanceLevel alpha);

/// Combined linear factor applied to a raw z for one experiment.
double correction_scale(std::int64_t treatments, std::int64_t n_total, const CorrectionPolicy& policy);

}  // namespace powerlearn
