#include "powerlearn/objective.hpp"

#include <cmath>
#include <numbers>

#include "powerlearn/errors.hpp"
#include "powerlearn/kernels.hpp"

namespace powerlearn {
namespace {

struct Term {
    double value;
    double slope;  // d value / d z
};

double sign(double z) { return z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0); }

// Below this z the lower tail Phi(z) is evaluated through its asymptotic
// expansion so that log Phi and phi / Phi stay finite.
constexpr double kAsymptoticTail = -20.0;

double tail_series(double z) {
    const double r = 1.0 / (z * z);
    return 1.0 - r + 3.0 * r * r - 15.0 * r * r * r;
}

double log_cdf(double z) {
    if (z > kAsymptoticTail) return std::log(std_normal_cdf(z));
    return -0.5 * z * z - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log(tail_series(z));
}

double pdf_over_cdf(double z) {
    if (z > kAsymptoticTail) return std_normal_pdf(z) / std_normal_cdf(z);
    return -z / tail_series(z);
}

Term one_tailed_term(ObjectiveKind kind, double z) {
    const double p = std_normal_sf(z);
    const double dp = -std_normal_pdf(z);
    switch (kind) {
        case ObjectiveKind::PValue:
            return {p, dp};
        case ObjectiveKind::LogPValue: {
            const double log_q = log_cdf(z);
            // d/dz [-p log q] = -log q * dp - p * (dq/dz) / q, with dq/dz = phi.
            return {-p * log_q, -log_q * dp - p * pdf_over_cdf(z)};
        }
        case ObjectiveKind::ZScore:
            break;
    }
    return {-z, -1.0};
}

Term two_tailed_term(ObjectiveKind kind, double z) {
    const double a = std::abs(z);
    const double s = sign(z);
    if (kind == ObjectiveKind::ZScore) return {-a, -s};
    const double p = std::erfc(a / std::numbers::sqrt2);
    const double dp = -2.0 * std_normal_pdf(z) * s;
    if (kind == ObjectiveKind::PValue) return {p, dp};
    const double q = std::erf(a / std::numbers::sqrt2);
    const double log_q = std::log(q);
    // dq/dz = -dp
    return {-p * log_q, -log_q * dp + p * dp / q};
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) noexcept {
    switch (kind) {
        case ObjectiveKind::ZScore:
            return "zscore";
        case ObjectiveKind::PValue:
            return "pvalue";
        case ObjectiveKind::LogPValue:
            return "logp";
    }
    return "unknown";
}

void validate(const ObjectiveConfig& cfg) {
    for (double v : {cfg.lambda_unknown, cfg.lambda_aa, cfg.delta}) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidArgument("objective weights (lambda_unknown, lambda_aa, delta) must be finite and >= 0");
        }
    }
}

std::size_t TrainingSet::dimension() const noexcept {
    for (const auto* group : {&known, &unknown, &aa}) {
        if (!group->empty()) return group->front().dimension();
    }
    return 0;
}

TrainingSet make_training_set(const Partition& partition, std::span<const std::size_t> input_indices) {
    return TrainingSet{prepare_all(partition.known, input_indices),
                       prepare_all(partition.unknown, input_indices),
                       prepare_all(partition.aa, input_indices)};
}

double log_p_transform(double p, double q) { return -p * std::log(q); }

Objective::Objective(const TrainingSet& data, ObjectiveConfig cfg) : cfg_(cfg), dim_(data.dimension()) {
    validate(cfg_);
    auto add = [&](const std::vector<PreparedExperiment>& exps, double weight, OutcomeLabel label) {
        if (exps.empty() || weight == 0.0) return;
        Group g{&exps, {}, weight, label};
        g.scales.reserve(exps.size());
        for (const auto& e : exps) {
            if (e.dimension() != dim_) throw InvalidArgument("training set mixes metric dimensions");
            g.scales.push_back(correction_scale(e.treatments, e.n_total, cfg_.correction));
        }
        groups_.push_back(std::move(g));
    };
    add(data.known, 1.0, OutcomeLabel::Known);
    add(data.unknown, cfg_.lambda_unknown, OutcomeLabel::Unknown);
    add(data.aa, -cfg_.lambda_aa, OutcomeLabel::AA);
}

double Objective::value(std::span<const double> w) const { return evaluate(w, {}, false, true); }

double Objective::data_term(std::span<const double> w) const { return evaluate(w, {}, false, false); }

double Objective::value_and_gradient(std::span<const double> w, std::span<double> grad) const {
    return evaluate(w, grad, true, true);
}

double Objective::evaluate(std::span<const double> w, std::span<double> grad, bool with_gradient,
                           bool with_penalty) const {
    if (w.size() != dim_) throw InvalidArgument("objective: weight dimension mismatch");
    if (with_gradient && grad.size() != dim_) throw InvalidArgument("objective: gradient dimension mismatch");
    if (with_gradient) std::fill(grad.begin(), grad.end(), 0.0);

    thread_local std::vector<double> s_w;
    s_w.resize(dim_);
    const auto& k = kernels::active();

    double loss = 0.0;
    for (const Group& g : groups_) {
        const auto& exps = *g.experiments;
        const double group_scale = g.weight / static_cast<double>(exps.size());
        double group_sum = 0.0;
        for (std::size_t e = 0; e < exps.size(); ++e) {
            const PreparedExperiment& exp = exps[e];
            const auto terms = k.project(exp.diff.data(), exp.pooled.data(), w.data(), s_w.data(), dim_);
            if (!(terms.quad > 0.0)) {
                throw DegenerateVariance("experiment '" + exp.id + "': quadratic form of the weights is not positive");
            }
            const double sigma = std::sqrt(terms.quad);
            const double c = g.scales[e];
            const double z = c * terms.projection / sigma;
            const Term t = g.label == OutcomeLabel::Known ? one_tailed_term(cfg_.kind, z)
                                                          : two_tailed_term(cfg_.kind, z);
            group_sum += t.value;
            if (with_gradient && t.slope != 0.0) {
                // dz/dw = c / sigma * (diff - (projection / quad) * S w)
                const double coef = group_scale * t.slope * c / sigma;
                k.axpy(coef, exp.diff.data(), grad.data(), dim_);
                k.axpy(-coef * terms.projection / terms.quad, s_w.data(), grad.data(), dim_);
            }
        }
        loss += group_scale * group_sum;
    }

    if (with_penalty && cfg_.delta > 0.0) {
        const double gap = static_cast<double>(dim_) - k.dot(w.data(), w.data(), dim_);
        loss += cfg_.delta * gap * gap;
        if (with_gradient) k.axpy(-4.0 * cfg_.delta * gap, w.data(), grad.data(), dim_);
    }
    return loss;
}

double loss_value(std::span<const double> w, const TrainingSet& data, const ObjectiveConfig& cfg) {
    return Objective(data, cfg).value(w);
}

std::vector<double> loss_gradient(std::span<const double> w, const TrainingSet& data,
                                  const ObjectiveConfig& cfg) {
    std::vector<double> grad(w.size());
    Objective(data, cfg).value_and_gradient(w, grad);
    return grad;
}

}  // namespace powerlearn
