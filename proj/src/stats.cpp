#include "powerlearn/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "powerlearn/errors.hpp"
#include "powerlearn/kernels.hpp"

namespace powerlearn {
namespace {

void require_finite(double z, const char* what) {
    if (!std::isfinite(z)) throw InvalidArgument(std::string(what) + ": argument must be finite");
}

double clamp_p(double p) { return std::clamp(p, kPValueFloor, 1.0); }

// Acklam's rational approximation of the lower-half quantile, p in (0, 0.5].
double ppf_lower_initial(double p) {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double ppf_lower(double p) {
    double x = ppf_lower_initial(p);
    // Halley refinement against the erfc-based CDF (accurate in the lower tail).
    const double err = std_normal_cdf(x) - p;
    const double u = err * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace

SignificanceLevel::SignificanceLevel(double alpha) : alpha_(alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidArgument("significance level must lie in (0, 1), got " + std::to_string(alpha));
    }
}

void validate_and_repair(VariantStats& stats) {
    const Eigen::Index n = stats.means.size();
    if (n == 0) throw ValidationError("dimension: variant has no metrics");
    if (stats.cov.rows() != n || stats.cov.cols() != n) {
        throw ValidationError("dimension: covariance is " + std::to_string(stats.cov.rows()) + "x" +
                              std::to_string(stats.cov.cols()) + " but there are " +
                              std::to_string(n) + " means");
    }
    if (stats.n_samples < 2) {
        throw ValidationError("sample count: n_samples must be >= 2, got " +
                              std::to_string(stats.n_samples));
    }
    if (!stats.means.allFinite() || !stats.cov.allFinite()) {
        throw ValidationError("finiteness: means and covariance must be finite");
    }

    const double scale = stats.cov.cwiseAbs().maxCoeff();
    const double asym = (stats.cov - stats.cov.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9 * scale) {
        std::ostringstream msg;
        msg << "symmetry: covariance asymmetry " << asym << " exceeds 1e-9 relative tolerance";
        throw ValidationError(msg.str());
    }
    Eigen::MatrixXd sym = 0.5 * (stats.cov + stats.cov.transpose());

    const double tol = 1e-9 * std::max(sym.trace(), 0.0) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
    const double smallest = solver.eigenvalues().minCoeff();
    if (smallest < -tol) {
        std::ostringstream msg;
        msg << "positive semi-definiteness: smallest eigenvalue " << smallest;
        if (sym.diagonal().minCoeff() < 0.0) msg << " (negative variance on the diagonal)";
        throw ValidationError(msg.str());
    }
    if (smallest < 0.0) sym.diagonal().array() -= smallest;
    stats.cov = std::move(sym);
}

double std_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double z) {
    require_finite(z, "std_normal_cdf");
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double std_normal_sf(double z) {
    require_finite(z, "std_normal_sf");
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

double std_normal_ppf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidArgument("std_normal_ppf: probability must lie in (0, 1)");
    }
    if (p <= 0.5) return ppf_lower(p);
    return -ppf_lower(1.0 - p);  // 1 - p is exact for p in [0.5, 1)
}

double z_score_metric(const VariantStats& a, const VariantStats& b, std::size_t metric) {
    const auto i = static_cast<Eigen::Index>(metric);
    if (i >= a.dimension() || i >= b.dimension()) {
        throw InvalidArgument("z_score_metric: metric index " + std::to_string(metric) +
                              " out of range");
    }
    const double var = a.cov(i, i) + b.cov(i, i);
    if (!(var > 0.0)) {
        throw DegenerateVariance("z_score_metric: pooled variance of metric " +
                                 std::to_string(metric) + " is not positive");
    }
    return (a.means[i] - b.means[i]) / std::sqrt(var);
}

double linear_metric_z(const VariantStats& a, const VariantStats& b, std::span<const double> w) {
    const auto n = static_cast<std::size_t>(a.dimension());
    if (w.size() != n || static_cast<std::size_t>(b.dimension()) != n) {
        throw InvalidArgument("linear_metric_z: weight dimension does not match the metrics");
    }
    const Eigen::VectorXd diff = a.means - b.means;
    const Eigen::MatrixXd pooled = a.cov + b.cov;
    std::vector<double> s_w(n);
    const auto terms = kernels::project({diff.data(), n}, {pooled.data(), n * n}, w, s_w);
    if (!(terms.quad > 0.0)) {
        throw DegenerateVariance("linear_metric_z: quadratic form w(S_A + S_B)w' is not positive");
    }
    return terms.projection / std::sqrt(terms.quad);
}

double two_tailed_p(double z) {
    require_finite(z, "two_tailed_p");
    return clamp_p(2.0 * std_normal_sf(std::abs(z)));
}

double one_tailed_p(double z) {
    require_finite(z, "one_tailed_p");
    return clamp_p(1.0 - std_normal_cdf(z));
}

double bonferroni_factor(std::int64_t treatments, SignificanceLevel alpha) {
    if (treatments < 1) throw InvalidArgument("bonferroni: treatment count must be >= 1");
    if (treatments == 1) return 1.0;
    const double a = alpha.value();
    return std_normal_ppf(a / 2.0) / std_normal_ppf(a / (2.0 * static_cast<double>(treatments)));
}

double bonferroni_corrected_z(double z, std::int64_t treatments, SignificanceLevel alpha) {
    return z * bonferroni_factor(treatments, alpha);
}

double avi_rho(SignificanceLevel alpha) {
    const double a = alpha.value();
    return 10000.0 / (std::log(std::log(std::numbers::e / (a * a))) - 2.0 * std::log(a));
}

double avi_factor(std::int64_t n_total, SignificanceLevel alpha) {
    if (n_total < 1) throw InvalidArgument("avi: total sample count must be >= 1");
    const double n = static_cast<double>(n_total);
    const double a = alpha.value();
    const double rho = avi_rho(alpha);
    const double inflation = ((n + rho) / n) * std::log((n + rho) / (rho * a * a));
    return 1.0 / std::sqrt(inflation);
}

double avi_corrected_z(double z, std::int64_t n_total, SignificanceLevel alpha) {
    return z * avi_factor(n_total, alpha);
}

double correction_scale(std::int64_t treatments, std::int64_t n_total, const CorrectionPolicy& policy) {
    double scale = 1.0;
    if (policy.bonferroni_over_treatments) scale *= bonferroni_factor(treatments, policy.alpha);
    if (policy.avi) scale *= avi_factor(n_total, policy.alpha);
    return scale;
}

}  // namespace powerlearn
