#pragma once

// Full-batch Adam training of metric weights with learning-rate halving on
// plateaus and patience-based convergence. Returns the best weights seen.

#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "powerlearn/objective.hpp"

namespace powerlearn {

enum class InitStrategy { Good, Constant, Bad };

std::string_view to_string(InitStrategy s) noexcept;

struct OptimizerConfig {
    double initial_learning_rate = 5e-4;
    long halving_patience = 1000;
    long convergence_patience = 10000;
    long max_steps = 1'000'000;
    InitStrategy init_strategy = InitStrategy::Good;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    /// A step counts as an improvement only if it lowers the best loss by more than this.
    double improvement_tolerance = 1e-12;
};

void validate(const OptimizerConfig& cfg);

struct TrainedMetric {
    MetricWeights weights;
    double final_loss = 0.0;
    long steps_to_convergence = 0;  ///< optimizer steps taken before stopping
    long best_step = 0;             ///< step at which the returned weights were seen
    bool converged = false;         ///< false when stopped by max_steps
    std::vector<std::pair<long, double>> loss_trace;
};

/// GOOD: mean of (mu_A - mu_B) over known experiments; CONSTANT: all ones;
/// BAD: negated GOOD. Rescaled so that |w|^2 = n_in. The seed is accepted for
/// interface stability; all three strategies are deterministic.
MetricWeights init_weights(InitStrategy strategy, std::span<const PreparedExperiment> known,
                           std::size_t n_in, std::uint64_t seed);

TrainedMetric train(const TrainingSet& data, const ObjectiveConfig& obj, const OptimizerConfig& opt);

/// Same as above but starting from explicit weights (used as-is, not rescaled).
TrainedMetric train(const TrainingSet& data, const ObjectiveConfig& obj, const OptimizerConfig& opt,
                    const MetricWeights& init);

/// Sees the weights and loss evaluated at every step, before the update.
using StepObserver = std::function<void(long step, std::span<const double> w, double loss)>;

TrainedMetric train(const TrainingSet& data, const ObjectiveConfig& obj, const OptimizerConfig& opt,
                    const MetricWeights& init, const StepObserver& observer);

}  // namespace powerlearn
