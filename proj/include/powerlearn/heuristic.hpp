#pragma once

// Closed-form learner: per-experiment optimal direction
//   w* ~ (S_A + S_B + eps I)^-1 (mu_A - mu_B)
// and the normalise-and-average combiner over experiments with known outcomes.

#include <string>
#include <vector>

#include "powerlearn/experiment.hpp"
#include "powerlearn/metric_weights.hpp"

namespace powerlearn {

/// Ridge added to the pooled covariance before solving.
struct ShrinkageConfig {
    double epsilon = 0.01;
};

/// Unit-norm direction maximising the z-score of a single experiment,
/// oriented so that its z on that experiment is non-negative.
/// Throws DegenerateDirection when mu_A == mu_B and SingularMatrix when the
/// shrunk covariance cannot be factored.
MetricWeights optimal_direction(const PreparedExperiment& exp, const ShrinkageConfig& cfg);

struct HeuristicFit {
    MetricWeights weights;
    std::vector<std::string> warnings;
};

/// Arithmetic mean of the per-experiment unit directions. The mean is not
/// re-normalised. A (near-)zero mean is returned with a warning.
HeuristicFit heuristic_weights(std::span<const PreparedExperiment> known, const ShrinkageConfig& cfg);

}  // namespace powerlearn
