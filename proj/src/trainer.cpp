#include "powerlearn/trainer.hpp"

#include <cmath>
#include <limits>

#include "powerlearn/errors.hpp"

namespace powerlearn {
namespace {

bool trace_step(long step) { return step < 1000 || step % 100 == 0; }

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

std::string_view to_string(InitStrategy s) noexcept {
    switch (s) {
        case InitStrategy::Good:
            return "good";
        case InitStrategy::Constant:
            return "constant";
        case InitStrategy::Bad:
            return "bad";
    }
    return "unknown";
}

void validate(const OptimizerConfig& cfg) {
    if (!(cfg.initial_learning_rate > 0.0) || !std::isfinite(cfg.initial_learning_rate)) {
        throw InvalidArgument("learning rate must be > 0");
    }
    if (cfg.halving_patience < 1 || cfg.convergence_patience < 1) {
        throw InvalidArgument("patience values must be >= 1");
    }
    if (cfg.max_steps < 0) throw InvalidArgument("max_steps must be >= 0");
}

MetricWeights init_weights(InitStrategy strategy, std::span<const PreparedExperiment> known,
                           std::size_t n_in, std::uint64_t /*seed*/) {
    if (n_in == 0) throw InvalidArgument("init_weights: dimension must be >= 1");
    std::vector<double> w(n_in, 1.0);
    if (strategy != InitStrategy::Constant) {
        if (known.empty()) throw InvalidArgument("init_weights: good/bad initialisation needs known experiments");
        std::fill(w.begin(), w.end(), 0.0);
        for (const auto& exp : known) {
            if (exp.dimension() != n_in) throw InvalidArgument("init_weights: dimension mismatch");
            for (std::size_t i = 0; i < n_in; ++i) w[i] += exp.diff[i];
        }
        for (double& v : w) v /= static_cast<double>(known.size());
        if (strategy == InitStrategy::Bad) {
            for (double& v : w) v = -v;
        }
    }
    MetricWeights out(std::move(w));
    const double norm = out.norm();
    if (!(norm > 0.0)) throw DegenerateDirection("init_weights: mean difference over known experiments is zero");
    const double scale = std::sqrt(static_cast<double>(n_in)) / norm;
    for (double& v : out.values) v *= scale;
    return out;
}

TrainedMetric train(const TrainingSet& data, const ObjectiveConfig& obj, const OptimizerConfig& opt) {
    return train(data, obj, opt, init_weights(opt.init_strategy, data.known, data.dimension(), opt.seed));
}

TrainedMetric train(const TrainingSet& data, const ObjectiveConfig& obj, const OptimizerConfig& opt,
                    const MetricWeights& init) {
    return train(data, obj, opt, init, StepObserver{});
}

TrainedMetric train(const TrainingSet& data, const ObjectiveConfig& obj, const OptimizerConfig& opt,
                    const MetricWeights& init, const StepObserver& observer) {
    validate(opt);
    const bool usable = !data.known.empty() || (!data.unknown.empty() && obj.lambda_unknown > 0.0) ||
                        (!data.aa.empty() && obj.lambda_aa > 0.0);
    if (!usable) throw InvalidArgument("train: no experiment partition contributes to the objective");

    const Objective objective(data, obj);
    const std::size_t n = objective.dimension();
    if (init.dimension() != n) throw InvalidArgument("train: initial weights have the wrong dimension");

    std::vector<double> w = init.values;
    std::vector<double> grad(n), m(n, 0.0), v(n, 0.0);

    TrainedMetric result;
    result.weights = init;
    double best = std::numeric_limits<double>::infinity();
    double lr = opt.initial_learning_rate;
    long since_improvement = 0;
    long since_halving = 0;
    double beta1_t = 1.0;
    double beta2_t = 1.0;

    long step = 0;
    for (;; ++step) {
        double loss;
        try {
            loss = step < opt.max_steps ? objective.value_and_gradient(w, grad) : objective.value(w);
        } catch (const DegenerateVariance& e) {
            if (step == 0) throw;
            throw TrainingDiverged(step, e.what());
        }
        if (!std::isfinite(loss)) throw TrainingDiverged(step, "loss is not finite");
        if (observer) observer(step, w, loss);

        if (loss < best - opt.improvement_tolerance) {
            best = loss;
            result.weights.values = w;
            result.best_step = step;
            since_improvement = 0;
            since_halving = 0;
        } else {
            ++since_improvement;
            ++since_halving;
        }
        if (trace_step(step)) result.loss_trace.emplace_back(step, loss);

        if (step >= opt.max_steps) break;
        if (since_improvement >= opt.convergence_patience) {
            result.converged = true;
            break;
        }
        if (since_halving >= opt.halving_patience) {
            lr *= 0.5;
            since_halving = 0;
        }
        if (!all_finite(grad)) throw TrainingDiverged(step, "gradient is not finite");

        beta1_t *= opt.beta1;
        beta2_t *= opt.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grad[i];
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / (1.0 - beta1_t);
            const double v_hat = v[i] / (1.0 - beta2_t);
            w[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.adam_epsilon);
        }
        if (!all_finite(w)) throw TrainingDiverged(step + 1, "weights are not finite");
    }
    if (result.loss_trace.empty() || result.loss_trace.back().first != step) {
        result.loss_trace.emplace_back(step, objective.value(w));
    }
    result.steps_to_convergence = step;
    result.final_loss = objective.value(result.weights.values);
    return result;
}

}  // namespace powerlearn
