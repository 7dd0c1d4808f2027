#pragma once

// Differentiable learning objectives for linear metrics.
//
// Every objective is expressed as a loss to *minimise*. For each experiment
// the corrected z of the linear metric is computed first, then:
//   z-score:  -[ mean_K z + l_unknown mean_U |z| - l_aa mean_AA |z| ]
//   p-value:   mean_K p1(z) + l_unknown mean_U p2(z) - l_aa mean_AA p2(z)
//   log-p:     as p-value with p replaced by -p log(1 - p)
// where p1 is the one-tailed and p2 the two-tailed p-value. A spherical
// penalty delta (N - |w|^2)^2 is added; it vanishes on the sphere |w|^2 = N
// and leaves the scale-free optima in place.

#include <span>
#include <string_view>
#include <vector>

#include "powerlearn/experiment.hpp"
#include "powerlearn/metric_weights.hpp"

namespace powerlearn {

enum class ObjectiveKind { ZScore, PValue, LogPValue };

std::string_view to_string(ObjectiveKind kind) noexcept;

struct ObjectiveConfig {
    ObjectiveKind kind = ObjectiveKind::LogPValue;
    double lambda_unknown = 0.5;
    double lambda_aa = 0.0;
    double delta = 5e-4;
    CorrectionPolicy correction{};
};

/// Validates the non-negativity and finiteness of the mixing weights.
void validate(const ObjectiveConfig& cfg);

/// Experiments prepared over the input metrics, split by label.
struct TrainingSet {
    std::vector<PreparedExperiment> known;
    std::vector<PreparedExperiment> unknown;
    std::vector<PreparedExperiment> aa;

    std::size_t dimension() const noexcept;
    bool empty() const noexcept { return known.empty() && unknown.empty() && aa.empty(); }
};

TrainingSet make_training_set(const Partition& partition, std::span<const std::size_t> input_indices);

/// -p log(1 - p), with q = 1 - p supplied separately so that it need not be
/// formed by cancellation.
double log_p_transform(double p, double q);

/// Loss and analytic gradient over a fixed training set. Correction scale
/// factors are computed once at construction.
class Objective {
public:
    Objective(const TrainingSet& data, ObjectiveConfig cfg);

    double value(std::span<const double> w) const;
    /// Writes the gradient into `grad` (resized by the caller to dimension()).
    double value_and_gradient(std::span<const double> w, std::span<double> grad) const;

    /// Loss without the spherical penalty.
    double data_term(std::span<const double> w) const;

    const ObjectiveConfig& config() const noexcept { return cfg_; }
    std::size_t dimension() const noexcept { return dim_; }

private:
    struct Group {
        const std::vector<PreparedExperiment>* experiments;
        std::vector<double> scales;
        double weight;
        OutcomeLabel label;
    };

    double evaluate(std::span<const double> w, std::span<double> grad, bool with_gradient,
                    bool with_penalty) const;

    ObjectiveConfig cfg_;
    std::size_t dim_;
    std::vector<Group> groups_;
};

double loss_value(std::span<const double> w, const TrainingSet& data, const ObjectiveConfig& cfg);
std::vector<double> loss_gradient(std::span<const double> w, const TrainingSet& data,
                                  const ObjectiveConfig& cfg);

}  // namespace powerlearn
