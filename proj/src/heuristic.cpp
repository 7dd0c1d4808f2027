#include "powerlearn/heuristic.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "powerlearn/errors.hpp"

namespace powerlearn {

MetricWeights optimal_direction(const PreparedExperiment& exp, const ShrinkageConfig& cfg) {
    if (!(cfg.epsilon >= 0.0)) throw InvalidArgument("shrinkage epsilon must be >= 0");
    const auto n = static_cast<Eigen::Index>(exp.dimension());
    const Eigen::Map<const Eigen::VectorXd> diff(exp.diff.data(), n);
    if (diff.isZero(0.0)) {
        throw DegenerateDirection("experiment '" + exp.id + "': mean difference is zero, no preferred direction");
    }
    Eigen::MatrixXd shrunk = Eigen::Map<const Eigen::MatrixXd>(exp.pooled.data(), n, n);
    shrunk.diagonal().array() += cfg.epsilon;

    Eigen::LLT<Eigen::MatrixXd> llt(shrunk);
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
        throw SingularMatrix("experiment '" + exp.id +
                             "': pooled covariance is singular; use a shrinkage epsilon > 0");
    }
    Eigen::VectorXd w = llt.solve(diff);
    const double norm = w.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw SingularMatrix("experiment '" + exp.id + "': direction solve failed");
    }
    w /= norm;
    if (w.dot(diff) < 0.0) w = -w;
    return MetricWeights(std::vector<double>(w.data(), w.data() + n));
}

HeuristicFit heuristic_weights(std::span<const PreparedExperiment> known, const ShrinkageConfig& cfg) {
    if (known.empty()) throw InvalidArgument("heuristic_weights: no experiments with known outcomes");
    const std::size_t n = known.front().dimension();
    std::vector<double> mean(n, 0.0);
    for (const auto& exp : known) {
        MetricWeights dir;
        try {
            dir = optimal_direction(exp, cfg);
        } catch (const DegenerateDirection& e) {
            throw DegenerateDirection(std::string("heuristic_weights: ") + e.what());
        } catch (const SingularMatrix& e) {
            throw SingularMatrix(std::string("heuristic_weights: ") + e.what());
        }
        for (std::size_t i = 0; i < n; ++i) mean[i] += dir.values[i];
    }
    for (double& v : mean) v /= static_cast<double>(known.size());

    HeuristicFit fit{MetricWeights(std::move(mean)), {}};
    if (fit.weights.norm() < 1e-12) {
        fit.warnings.push_back("heuristic directions cancel: averaged weight vector is (near) zero");
    }
    return fit;
}

}  // namespace powerlearn
