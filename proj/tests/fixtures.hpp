#pragma once

#include <random>
#include <string>
#include <vector>

#include "powerlearn/experiment.hpp"

namespace testing_support {

using powerlearn::ExperimentRecord;
using powerlearn::OutcomeLabel;
using powerlearn::PreparedExperiment;

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng, double floor = 0.1) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Eigen::MatrixXd s = a * a.transpose() / n;
    s.diagonal().array() += floor;
    return s;
}

inline ExperimentRecord make_record(std::string id, OutcomeLabel label, Eigen::VectorXd mu_a,
                                    Eigen::VectorXd mu_b, Eigen::MatrixXd cov_a, Eigen::MatrixXd cov_b,
                                    std::int64_t n = 1000, std::int64_t treatments = 1) {
    ExperimentRecord r;
    r.id = std::move(id);
    r.label = label;
    r.treatments = treatments;
    for (Eigen::Index i = 0; i < mu_a.size(); ++i) r.metric_names.push_back("m" + std::to_string(i));
    r.a = {std::move(mu_a), std::move(cov_a), n};
    r.b = {std::move(mu_b), std::move(cov_b), n};
    return r;
}

/// mu_A = [1, 1], mu_B = [0.5, 0.5], unit covariances.
inline ExperimentRecord toy_record(std::string id = "toy") {
    Eigen::Vector2d a(1.0, 1.0), b(0.5, 0.5);
    return make_record(std::move(id), OutcomeLabel::Known, a, b, Eigen::Matrix2d::Identity(),
                       Eigen::Matrix2d::Identity(), 2);
}

inline PreparedExperiment random_prepared(int n, std::mt19937_64& rng, OutcomeLabel label, std::string id,
                                          double shift = 0.5, std::int64_t treatments = 1) {
    std::normal_distribution<double> g;
    PreparedExperiment e;
    e.id = std::move(id);
    e.label = label;
    e.treatments = treatments;
    e.n_total = 20000;
    const Eigen::MatrixXd s = random_spd(n, rng);
    for (int i = 0; i < n; ++i) e.diff.push_back(shift + g(rng));
    e.pooled.assign(s.data(), s.data() + s.size());
    return e;
}

inline std::string temp_dir(const std::string& name) {
    const std::string dir = std::string(POWERLEARN_TEST_TMP) + "/" + name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
