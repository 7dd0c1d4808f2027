#include "powerlearn/trainer.hpp"

#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "powerlearn/errors.hpp"
#include "powerlearn/heuristic.hpp"

using namespace powerlearn;

namespace {

TrainingSet toy_set() {
    TrainingSet s;
    const std::size_t idx[] = {0, 1};
    s.known.push_back(prepare(testing_support::toy_record(), idx));
    return s;
}

ObjectiveConfig config(ObjectiveKind kind, double delta) {
    ObjectiveConfig c;
    c.kind = kind;
    c.delta = delta;
    c.lambda_unknown = 0.5;
    c.correction.bonferroni_over_treatments = false;
    return c;
}

TrainingSet random_set(std::uint64_t seed, int dim) {
    std::mt19937_64 rng(seed);
    TrainingSet s;
    for (int i = 0; i < 8; ++i) s.known.push_back(testing_support::random_prepared(dim, rng, OutcomeLabel::Known, "k", 0.3));
    for (int i = 0; i < 4; ++i) s.unknown.push_back(testing_support::random_prepared(dim, rng, OutcomeLabel::Unknown, "u", 0.1));
    return s;
}

const std::vector<double> kDiagonal{1.0, 1.0};

}  // namespace

TEST(InitWeights, Strategies) {
    const auto set = toy_set();
    const auto good = init_weights(InitStrategy::Good, set.known, 2, 0);
    const auto bad = init_weights(InitStrategy::Bad, set.known, 2, 0);
    EXPECT_NEAR(good.values[0], 1.0, 1e-15);
    EXPECT_NEAR(good.values[1], 1.0, 1e-15);
    for (int i = 0; i < 2; ++i) EXPECT_EQ(bad.values[i], -good.values[i]);
    const auto constant = init_weights(InitStrategy::Constant, {}, 4, 0);
    EXPECT_EQ(constant.values, std::vector<double>(4, 1.0));

    const auto rs = random_set(3, 6);
    for (auto s : {InitStrategy::Good, InitStrategy::Constant, InitStrategy::Bad}) {
        const auto w = init_weights(s, rs.known, 6, 0);
        EXPECT_NEAR(6.0 - w.squared_norm(), 0.0, 1e-12);
    }
    EXPECT_THROW(init_weights(InitStrategy::Good, {}, 2, 0), InvalidArgument);
}

TEST(Train, GoodInitConvergesToToyOptimumForEveryKind) {
    for (auto kind : {ObjectiveKind::ZScore, ObjectiveKind::PValue, ObjectiveKind::LogPValue}) {
        OptimizerConfig opt;
        opt.init_strategy = InitStrategy::Constant;
        // Start off the optimum so there is something to learn.
        const auto r = train(toy_set(), config(kind, 5e-4), opt, MetricWeights({1.4, 0.1}));
        EXPECT_GE(cosine(r.weights.span(), kDiagonal), 0.999) << to_string(kind);
        EXPECT_TRUE(r.converged);
        const auto good = train(toy_set(), config(kind, 5e-4), OptimizerConfig{});
        EXPECT_GE(cosine(good.weights.span(), kDiagonal), 0.999);
    }
}

TEST(Train, BadInitIsStationaryOnSymmetricToy) {
    // -GOOD is antipodal to the optimum of a scale-free objective, where the gradient vanishes.
    OptimizerConfig opt;
    opt.init_strategy = InitStrategy::Bad;
    opt.convergence_patience = 50;
    const auto r = train(toy_set(), config(ObjectiveKind::ZScore, 0.0), opt);
    EXPECT_NEAR(cosine(r.weights.span(), kDiagonal), -1.0, 1e-12);
}

TEST(Train, ZeroStepsReturnsInitialisation) {
    OptimizerConfig opt;
    opt.max_steps = 0;
    const MetricWeights init({0.3, -2.0});
    const auto r = train(toy_set(), config(ObjectiveKind::LogPValue, 5e-4), opt, init);
    EXPECT_EQ(r.weights.values, init.values);
    EXPECT_EQ(r.steps_to_convergence, 0);
    EXPECT_DOUBLE_EQ(r.final_loss, loss_value(init.span(), toy_set(), config(ObjectiveKind::LogPValue, 5e-4)));
}

TEST(Train, FinalLossMatchesWeightsAndTraceInvariants) {
    const auto data = random_set(5, 4);
    for (auto kind : {ObjectiveKind::ZScore, ObjectiveKind::PValue, ObjectiveKind::LogPValue}) {
        OptimizerConfig opt;
        opt.convergence_patience = 2000;
        const auto cfg = config(kind, 5e-4);
        const auto r = train(data, cfg, opt);
        EXPECT_NEAR(r.final_loss, loss_value(r.weights.span(), data, cfg), 1e-9);
        double running = std::numeric_limits<double>::infinity();
        long prev_step = -1;
        for (const auto& [step, loss] : r.loss_trace) {
            EXPECT_GT(step, prev_step);
            if (step < 1000) {
                EXPECT_EQ(step, prev_step + 1);
            }
            prev_step = step;
            running = std::min(running, loss);
            EXPECT_LE(r.final_loss, loss + 1e-12);
        }
        EXPECT_NEAR(running, r.final_loss, 1e-9 + std::abs(running) * 1e-12 + 1e-12);
        EXPECT_LE(r.best_step, r.steps_to_convergence);
    }
}

TEST(Train, Deterministic) {
    const auto data = random_set(6, 5);
    OptimizerConfig opt;
    opt.convergence_patience = 1500;
    const auto a = train(data, config(ObjectiveKind::LogPValue, 5e-4), opt);
    const auto b = train(data, config(ObjectiveKind::LogPValue, 5e-4), opt);
    EXPECT_EQ(a.weights.values, b.weights.values);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Train, ZScoreRecoversClosedFormOnSingleExperiment) {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 3; ++rep) {
        TrainingSet s;
        s.known.push_back(testing_support::random_prepared(3, rng, OutcomeLabel::Known, "k", 0.5));
        const auto closed = optimal_direction(s.known[0], ShrinkageConfig{0.0});
        const auto r = train(s, config(ObjectiveKind::ZScore, 5e-4), OptimizerConfig{});
        EXPECT_GE(cosine(r.weights.span(), closed.span()), 0.999);
    }
}

TEST(Train, SphericalPenaltyPreservesOptimum) {
    const auto data = random_set(8, 3);
    for (auto kind : {ObjectiveKind::ZScore, ObjectiveKind::PValue, ObjectiveKind::LogPValue}) {
        OptimizerConfig opt;
        const auto plain = train(data, config(kind, 0.0), opt);
        const auto reg = train(data, config(kind, 5e-4), opt);
        EXPECT_NEAR(loss_value(reg.weights.span(), data, config(kind, 0.0)), plain.final_loss, 1e-4) << to_string(kind);
    }
}

TEST(Train, ObserverSeesEveryStep) {
    OptimizerConfig opt;
    opt.max_steps = 25;
    long calls = 0, last = -1;
    train(toy_set(), config(ObjectiveKind::ZScore, 5e-4), opt, MetricWeights({1.0, 0.0}),
          [&](long step, std::span<const double> w, double) {
              EXPECT_EQ(step, last + 1);
              EXPECT_EQ(w.size(), 2u);
              last = step;
              ++calls;
          });
    EXPECT_EQ(calls, 26);
}

TEST(Train, Errors) {
    TrainingSet empty_known;
    std::mt19937_64 rng(1);
    empty_known.aa.push_back(testing_support::random_prepared(2, rng, OutcomeLabel::AA, "a"));
    EXPECT_THROW(train(empty_known, config(ObjectiveKind::ZScore, 0.0), OptimizerConfig{}, MetricWeights({1.0, 1.0})),
                 InvalidArgument);
    EXPECT_THROW(train(toy_set(), config(ObjectiveKind::ZScore, 0.0), OptimizerConfig{}, MetricWeights({0.0, 0.0})),
                 DegenerateVariance);
    OptimizerConfig bad;
    bad.initial_learning_rate = 0.0;
    EXPECT_THROW(train(toy_set(), config(ObjectiveKind::ZScore, 0.0), bad), InvalidArgument);
}
