#include "powerlearn/evaluation.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>
#include <random>

#include "fixtures.hpp"
#include "powerlearn/errors.hpp"

using namespace powerlearn;

namespace {

std::vector<FoldResult> folds_from(const std::vector<std::pair<OutcomeLabel, double>>& rows, const std::string& method) {
    std::vector<FoldResult> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.push_back(make_fold("e" + std::to_string(100 + i), method, rows[i].first, rows[i].second));
    }
    return out;
}

ExperimentCorpus random_corpus(std::uint64_t seed, int n_known, int n_unknown, int n_aa) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    ExperimentCorpus c;
    auto add = [&](OutcomeLabel label, int i, double shift) {
        Eigen::VectorXd a(4), b(4);
        for (int j = 0; j < 4; ++j) {
            a[j] = shift * (j + 1) * 0.5 + g(rng) * 0.3;
            b[j] = g(rng) * 0.3;
        }
        c.records.push_back(testing_support::make_record(std::string(to_string(label)) + std::to_string(i), label, a, b,
                                                         testing_support::random_spd(4, rng) * 0.1,
                                                         testing_support::random_spd(4, rng) * 0.1, 5000, 1 + i % 2));
    };
    for (int i = 0; i < n_known; ++i) add(OutcomeLabel::Known, i, 1.0);
    for (int i = 0; i < n_unknown; ++i) add(OutcomeLabel::Unknown, i, i % 2 ? 0.8 : -0.8);
    for (int i = 0; i < n_aa; ++i) add(OutcomeLabel::AA, i, 0.0);
    c.north_star_index = 0;
    c.input_indices = {1, 2, 3};
    validate_corpus(c);
    return c;
}

}  // namespace

TEST(Classify, TableOneOutcomes) {
    const SignificanceLevel a05(0.05), a01(0.01);
    const auto m1 = make_fold("x", "m1", OutcomeLabel::Known, 1.97);
    EXPECT_EQ(classify(m1, OutcomeLabel::Known, a05), OutcomeClass::Agreement);
    EXPECT_EQ(classify(m1, OutcomeLabel::Known, a01), OutcomeClass::Inconclusive);
    const auto m2a = make_fold("x", "m2", OutcomeLabel::Known, 1.90);
    EXPECT_EQ(classify(m2a, OutcomeLabel::Known, a05), OutcomeClass::Inconclusive);
    const auto m3a = make_fold("x", "m3", OutcomeLabel::Known, -2.58);
    EXPECT_EQ(classify(m3a, OutcomeLabel::Known, a05), OutcomeClass::Disagreement);
    EXPECT_EQ(classify(m3a, OutcomeLabel::Known, a01), OutcomeClass::Disagreement);
    const auto m3b = make_fold("x", "m3", OutcomeLabel::Known, 8.0);
    EXPECT_EQ(classify(m3b, OutcomeLabel::Known, a01), OutcomeClass::Agreement);
}

TEST(Classify, UnknownAndAa) {
    const SignificanceLevel a05(0.05);
    EXPECT_EQ(classify(make_fold("x", "m", OutcomeLabel::Unknown, -2.5), OutcomeLabel::Unknown, a05),
              OutcomeClass::Significant);
    EXPECT_EQ(classify(make_fold("x", "m", OutcomeLabel::Unknown, 1.5), OutcomeLabel::Unknown, a05),
              OutcomeClass::Inconclusive);
    EXPECT_EQ(classify(make_fold("x", "m", OutcomeLabel::AA, 2.1), OutcomeLabel::AA, a05), OutcomeClass::Rejected);
    EXPECT_EQ(classify(make_fold("x", "m", OutcomeLabel::AA, -0.1), OutcomeLabel::AA, a05), OutcomeClass::Accepted);
}

TEST(AlphaGrid, ContainsExactLevelsAndIsSorted) {
    const auto grid = default_alpha_grid();
    EXPECT_EQ(grid.size(), 52u);
    EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
    EXPECT_NE(std::find(grid.begin(), grid.end(), 0.05), grid.end());
    EXPECT_NE(std::find(grid.begin(), grid.end(), 0.01), grid.end());
    EXPECT_NEAR(grid.front(), 1e-4, 1e-18);
    EXPECT_EQ(grid.back(), 0.2);
}

TEST(ErrorRates, HandCountedFixture) {
    const auto folds = folds_from({{OutcomeLabel::Known, 3.0},
                                   {OutcomeLabel::Known, 1.0},
                                   {OutcomeLabel::Known, -2.5},
                                   {OutcomeLabel::Known, 2.2},
                                   {OutcomeLabel::Unknown, -2.2},
                                   {OutcomeLabel::Unknown, 0.3},
                                   {OutcomeLabel::AA, 0.1},
                                   {OutcomeLabel::AA, 2.5},
                                   {OutcomeLabel::AA, -0.7},
                                   {OutcomeLabel::AA, 1.0}},
                                  "m");
    const std::vector<double> grid{0.01, 0.05};
    const auto r = error_rates(folds, grid);
    // alpha = 0.05: known agree {3.0, 2.2}, disagree {-2.5}, inconclusive {1.0};
    // unknown significant {-2.2}; A/A rejected {2.5}.
    EXPECT_DOUBLE_EQ(r.agreement->at(1), 0.5);
    EXPECT_DOUBLE_EQ(r.type_iii->at(1), 0.25);
    EXPECT_DOUBLE_EQ(r.known_inconclusive->at(1), 0.25);
    EXPECT_DOUBLE_EQ(r.power->at(1), 3.0 / 6.0);
    EXPECT_DOUBLE_EQ(r.type_ii->at(1), 2.0 / 6.0);
    EXPECT_DOUBLE_EQ(r.type_i->at(1), 0.25);
    // alpha = 0.01 (|z| > 2.576): agree {3.0}; nothing else rejects.
    EXPECT_DOUBLE_EQ(r.power->at(0), 1.0 / 6.0);
    EXPECT_DOUBLE_EQ(r.type_iii->at(0), 0.0);
    EXPECT_DOUBLE_EQ(r.type_i->at(0), 0.0);
}

TEST(ErrorRates, PowerAndTypeTwoComplementWithoutTypeThree) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(2.0, 1.0);
    std::vector<std::pair<OutcomeLabel, double>> rows;
    for (int i = 0; i < 200; ++i) rows.push_back({i % 2 ? OutcomeLabel::Known : OutcomeLabel::Unknown, std::abs(g(rng))});
    const auto folds = folds_from(rows, "m");
    const auto grid = default_alpha_grid();
    const auto r = error_rates(folds, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_DOUBLE_EQ(r.type_iii->at(i), 0.0);
        EXPECT_NEAR(r.power->at(i) + r.type_ii->at(i), 1.0, 1e-15);
    }
    EXPECT_FALSE(r.type_i.has_value());
}

TEST(ErrorRates, GridRowsMatchClassify) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(1.5, 1.5);
    std::vector<std::pair<OutcomeLabel, double>> rows;
    for (int i = 0; i < 90; ++i) rows.push_back({static_cast<OutcomeLabel>(i % 3), g(rng)});
    const auto folds = folds_from(rows, "m");
    const auto grid = default_alpha_grid();
    const auto r = error_rates(folds, grid);
    for (double a : {0.05, 0.01}) {
        const auto i = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), a) - grid.begin());
        int agree = 0, known = 0, aa_rej = 0, aa = 0;
        for (const auto& f : folds) {
            const auto c = classify(f, f.label, SignificanceLevel(a));
            if (f.label == OutcomeLabel::Known) {
                ++known;
                agree += c == OutcomeClass::Agreement;
            } else if (f.label == OutcomeLabel::AA) {
                ++aa;
                aa_rej += c == OutcomeClass::Rejected;
            }
        }
        EXPECT_DOUBLE_EQ(r.agreement->at(i), static_cast<double>(agree) / known);
        EXPECT_DOUBLE_EQ(r.type_i->at(i), static_cast<double>(aa_rej) / aa);
    }
}

TEST(SetPower, SingletonEqualsStandalone) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(1.0, 2.0);
    std::vector<std::pair<OutcomeLabel, double>> rows;
    for (int i = 0; i < 60; ++i) rows.push_back({static_cast<OutcomeLabel>(i % 3), g(rng)});
    const auto folds = folds_from(rows, "m");
    const auto grid = default_alpha_grid();
    const std::vector<std::vector<FoldResult>> members{folds};
    const auto a = set_power(members, grid);
    const auto b = error_rates(folds, grid);
    EXPECT_EQ(*a.power, *b.power);
    EXPECT_EQ(*a.type_i, *b.type_i);
    EXPECT_EQ(*a.type_iii, *b.type_iii);
}

TEST(SetPower, AnyMemberAtBonferroniLevel) {
    // Two members; alpha/2 per member.
    const auto x = folds_from({{OutcomeLabel::Known, 2.1}, {OutcomeLabel::Known, -2.4}, {OutcomeLabel::Unknown, 0.1}}, "x");
    const auto y = folds_from({{OutcomeLabel::Known, 2.4}, {OutcomeLabel::Known, 3.0}, {OutcomeLabel::Unknown, -2.4}}, "y");
    const std::vector<std::vector<FoldResult>> members{x, y};
    const std::vector<double> grid{0.05};
    const auto r = set_power(members, grid);
    // Per-member level 0.025: |z| > 2.2414 rejects.
    EXPECT_DOUBLE_EQ(r.agreement->at(0), 1.0);  // e100 via y, e101 via y despite x pointing the wrong way
    EXPECT_DOUBLE_EQ(r.type_iii->at(0), 0.0);
    EXPECT_DOUBLE_EQ(r.power->at(0), 1.0);

    const auto z = folds_from({{OutcomeLabel::Known, 0.0}, {OutcomeLabel::Known, 0.0}, {OutcomeLabel::Unknown, 0.0}}, "z");
    const std::vector<std::vector<FoldResult>> wrong{x, z};
    const auto w = set_power(wrong, grid);
    EXPECT_DOUBLE_EQ(w.type_iii->at(0), 0.5);  // only x at -2.4 rejects for e101
}

TEST(SetPower, MismatchedMembersRejected) {
    const auto x = folds_from({{OutcomeLabel::Known, 2.1}}, "x");
    auto y = x;
    y[0].experiment_id = "other";
    const std::vector<std::vector<FoldResult>> members{x, y};
    const std::vector<double> grid{0.05};
    EXPECT_THROW(set_power(members, grid), InvalidArgument);
}

TEST(SampleSize, RatioAndCurve) {
    EXPECT_DOUBLE_EQ(sample_size_ratio(2.0, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(sample_size_ratio(-3.0, 1.5), 4.0);
    EXPECT_THROW(sample_size_ratio(1.0, 0.0), InvalidArgument);
    const auto ref = folds_from({{OutcomeLabel::Known, 2.0}, {OutcomeLabel::Unknown, -2.0}, {OutcomeLabel::AA, 9.0}}, "r");
    const auto cand = folds_from({{OutcomeLabel::Known, 4.0}, {OutcomeLabel::Unknown, -4.0}, {OutcomeLabel::AA, 0.0}}, "c");
    const std::vector<double> grid{0.05, 0.01};
    const std::vector<std::vector<FoldResult>> r{ref}, c{cand};
    const auto same = sample_size_ratio_curve(r, r, grid);
    EXPECT_DOUBLE_EQ(same[0], 1.0);
    const auto curve = sample_size_ratio_curve(c, r, grid);
    EXPECT_DOUBLE_EQ(curve[0], 4.0);
    // A pair {ref, cand} pays the Bonferroni price for two members.
    const std::vector<std::vector<FoldResult>> pair{ref, cand};
    const auto paired = sample_size_ratio_curve(pair, r, grid);
    const double f = bonferroni_factor(2, SignificanceLevel(0.05));
    EXPECT_NEAR(paired[0], 4.0 * f * f, 1e-12);
}

TEST(Sensitivity, TableOneSummaries) {
    const auto m2 = folds_from({{OutcomeLabel::Known, 1.90}, {OutcomeLabel::Known, 3.50}}, "m2");
    const auto m3 = folds_from({{OutcomeLabel::Known, -2.58}, {OutcomeLabel::Known, 8.00}}, "m3");
    const auto s2 = sensitivity_summary(m2);
    const auto s3 = sensitivity_summary(m3);
    EXPECT_NEAR(s2.mean_z, 2.70, 5e-3);
    EXPECT_NEAR(s3.mean_abs_z, 5.29, 5e-3);
    EXPECT_NEAR(s2.mean_p / 1.45e-2, 1.0, 5e-3);
    EXPECT_NEAR(s3.mean_p / 4.98e-1, 1.0, 5e-3);
    EXPECT_EQ(s3.count, 2u);
}

TEST(Sensitivity, IgnoresNonKnownAndMedian) {
    const auto f = folds_from({{OutcomeLabel::Known, 1.0}, {OutcomeLabel::AA, 50.0}, {OutcomeLabel::Known, 3.0},
                               {OutcomeLabel::Known, 2.0}},
                              "m");
    const auto s = sensitivity_summary(f);
    EXPECT_EQ(s.count, 3u);
    EXPECT_DOUBLE_EQ(s.median_z, 2.0);
    EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
    EXPECT_THROW(median({}), InvalidArgument);
    const auto aa = folds_from({{OutcomeLabel::AA, 1.0}}, "m");
    EXPECT_THROW(sensitivity_summary(aa), InvalidArgument);
}

TEST(Loocv, FixedMetricMatchesCorrectedZ) {
    const auto c = random_corpus(4, 5, 3, 4);
    CorrectionPolicy policy;
    const auto r = loocv(c, Method{"ns", FixedMetricMethod{0}}, policy);
    ASSERT_EQ(r.folds.size(), c.records.size());
    EXPECT_TRUE(std::is_sorted(r.folds.begin(), r.folds.end(),
                               [](const auto& a, const auto& b) { return a.experiment_id < b.experiment_id; }));
    for (const auto& f : r.folds) {
        const auto it = std::find_if(c.records.begin(), c.records.end(), [&](const auto& x) { return x.id == f.experiment_id; });
        EXPECT_DOUBLE_EQ(f.z, corrected_z(*it, 0, policy));
    }
}

TEST(Loocv, HeuristicFoldsMatchManualHoldOut) {
    const auto c = random_corpus(5, 6, 3, 3);
    CorrectionPolicy policy;
    const ShrinkageConfig shrink{0.01};
    const auto r = loocv(c, Method{"h", HeuristicMethod{shrink}}, policy);
    EXPECT_EQ(r.models_trained, 7u);  // one per known record plus the shared full model
    ASSERT_EQ(r.folds.size(), c.records.size());
    for (const auto& f : r.folds) {
        std::vector<PreparedExperiment> train;
        const ExperimentRecord* held = nullptr;
        for (const auto& rec : c.records) {
            if (rec.id == f.experiment_id) held = &rec;
            if (rec.label == OutcomeLabel::Known && rec.id != f.experiment_id) {
                train.push_back(prepare(rec, c.input_indices));
            }
        }
        const auto w = heuristic_weights(train, shrink).weights;
        EXPECT_NEAR(f.z, corrected_z(prepare(*held, c.input_indices), w.span(), policy), 1e-12) << f.experiment_id;
    }
}

TEST(Loocv, ThreadCountDoesNotChangeResults) {
    const auto c = random_corpus(6, 5, 4, 3);
    GradientMethod g;
    g.optimizer.convergence_patience = 300;
    g.optimizer.halving_patience = 100;
    const Method m{"logp", g};
    const auto one = loocv(c, m, CorrectionPolicy{}, LoocvOptions{1});
    const auto many = loocv(c, m, CorrectionPolicy{}, LoocvOptions{3});
    ASSERT_EQ(one.folds.size(), many.folds.size());
    for (std::size_t i = 0; i < one.folds.size(); ++i) EXPECT_EQ(one.folds[i].z, many.folds[i].z);
    EXPECT_EQ(one.models_trained, 1u + 5u + 4u);  // A/A records do not contribute with lambda_aa = 0
}

TEST(Loocv, RequiresTwoKnownRecords) {
    const auto c = random_corpus(7, 1, 2, 2);
    EXPECT_THROW(loocv(c, Method{"h", HeuristicMethod{}}, CorrectionPolicy{}), InvalidArgument);
    EXPECT_NO_THROW(loocv(c, Method{"ns", FixedMetricMethod{0}}, CorrectionPolicy{}));
}

TEST(Evaluate, ReportSchemaAndSingletonSet) {
    const auto c = random_corpus(8, 6, 4, 20);
    EvaluationConfig cfg;
    cfg.methods.push_back({"heuristic", HeuristicMethod{}});
    const auto report = evaluate(c, cfg);
    ASSERT_NE(report.method("north_star"), nullptr);
    ASSERT_NE(report.method("top_proxy"), nullptr);
    ASSERT_NE(report.method("heuristic"), nullptr);
    for (const auto& m : report.methods) {
        ASSERT_TRUE(m.curves.type_iii.has_value()) << m.name;
        EXPECT_EQ(m.curves.type_iii->size(), cfg.alpha_grid.size());
    }
    const auto* single = report.set("north_star");
    ASSERT_NE(single, nullptr);
    EXPECT_EQ(*single->curves.power, *report.method("north_star")->curves.power);
    EXPECT_EQ(*single->curves.type_i, *report.method("north_star")->curves.type_i);
    for (double v : *single->sample_size_ratio) EXPECT_DOUBLE_EQ(v, 1.0);
    EXPECT_FALSE(report.top_proxy.empty());
}

TEST(Evaluate, FlaggedMethodsLeaveSets) {
    auto c = random_corpus(9, 6, 2, 4);
    // Metric 1 moves strongly against the vetted outcome on every known record.
    for (auto& r : c.records) {
        if (r.label == OutcomeLabel::Known) r.a.means[1] = r.b.means[1] - 5.0;
    }
    EvaluationConfig cfg;
    cfg.include_top_proxy = false;
    cfg.sets = {{"north_star", "wrong"}};
    cfg.methods.push_back({"wrong", FixedMetricMethod{1}});
    const auto report = evaluate(c, cfg);
    EXPECT_TRUE(report.method("wrong")->flagged);
    EXPECT_FALSE(report.method("north_star")->flagged);
    EXPECT_EQ(report.sets.at(0).excluded, std::vector<std::string>{"wrong"});
    EXPECT_EQ(report.sets.at(0).members, std::vector<std::string>{"north_star"});
    cfg.exclude_flagged = false;
    const auto kept = evaluate(c, cfg);
    EXPECT_TRUE(kept.sets.at(0).excluded.empty());
    EXPECT_GT(kept.sets.at(0).curves.type_iii->back(), 0.0);
}

TEST(Evaluate, UnknownSetMemberRejected) {
    const auto c = random_corpus(10, 3, 1, 1);
    EvaluationConfig cfg;
    cfg.sets = {{"north_star", "nope"}};
    EXPECT_THROW(evaluate(c, cfg), InvalidArgument);
}

TEST(Report, WritesJsonAndCurves) {
    const auto c = random_corpus(11, 4, 2, 6);
    EvaluationConfig cfg;
    cfg.methods.push_back({"heuristic", HeuristicMethod{}});
    const auto report = evaluate(c, cfg);
    const auto dir = testing_support::temp_dir("report");
    write_report(report, dir);
    EXPECT_TRUE(std::filesystem::exists(dir + "/report.json"));
    EXPECT_TRUE(std::filesystem::exists(dir + "/sensitivity.csv"));
    std::ifstream curve(dir + "/curves/heuristic.type_iii.csv");
    ASSERT_TRUE(curve.good());
    std::string header;
    std::getline(curve, header);
    EXPECT_EQ(header, "alpha,value");
    std::size_t rows = 0;
    for (std::string line; std::getline(curve, line);) ++rows;
    EXPECT_EQ(rows, cfg.alpha_grid.size());
    std::ifstream json(dir + "/report.json");
    const auto parsed = nlohmann::json::parse(json);
    EXPECT_EQ(parsed["methods"].size(), report.methods.size());
}
