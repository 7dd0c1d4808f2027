#pragma once

// Seeded generator of synthetic experiment corpora with planted structure:
// a weakly sensitive North Star at index 0, sensitive proxies, an optional
// adversarial metric and A/A pairs.

#include <cstdint>
#include <optional>
#include <vector>

#include "powerlearn/experiment.hpp"

namespace powerlearn {

/// A metric that usually moves against the treatment effect but now and then
/// moves strongly with it.
struct AdversarialConfig {
    std::size_t metric = 1;            ///< corpus index, must not be the North Star
    double base_sensitivity = -0.01;
    double burst_sensitivity = 0.3;
    double burst_probability = 0.15;
};

struct GeneratorConfig {
    std::size_t n_metrics = 11;  ///< including the North Star at index 0
    std::size_t n_known = 40;
    std::size_t n_unknown = 40;
    std::size_t n_aa = 2000;
    std::int64_t users_min = 100000;
    std::int64_t users_max = 1000000;
    double north_star_sensitivity = 0.005;
    /// One entry per input metric (indices 1..n_metrics-1), in standard
    /// deviations of the per-user metric per unit of latent effect.
    std::vector<double> proxy_sensitivities = {0.012, 0.01, 0.008, 0.0, 0.006, 0.005, 0.004, 0.003, 0.002, 0.0};
    std::optional<AdversarialConfig> adversarial = AdversarialConfig{4};
    double noise_scale = 1.0;
    std::size_t factor_rank = 3;
    std::int64_t treatments_min = 1;
    std::int64_t treatments_max = 3;
    double effect_min = 0.5;  ///< |theta| ~ U(effect_min, effect_max), sign uniform
    double effect_max = 1.5;
    double label_alpha = 0.05;
    std::uint64_t seed = 1;
    std::size_t max_attempts = 0;  ///< 0 = 200 * (n_known + n_unknown) + 1000

    /// Throws InvalidArgument on an unusable configuration.
    void validate() const;
};

ExperimentCorpus generate_corpus(const GeneratorConfig& cfg);

}  // namespace powerlearn
