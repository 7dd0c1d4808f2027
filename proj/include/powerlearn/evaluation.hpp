#pragma once

// Leave-one-out evaluation of learnt and baseline metrics: held-out corrected
// z-scores, outcome classification against the vetted labels, type-I/II/III
// error and power curves over a grid of significance levels, Bonferroni
// combination of metric sets, sensitivity summaries and sample-size ratios.

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "powerlearn/experiment.hpp"
#include "powerlearn/heuristic.hpp"
#include "powerlearn/trainer.hpp"

namespace powerlearn {

struct HeuristicMethod {
    ShrinkageConfig shrinkage{};
};

struct GradientMethod {
    ObjectiveConfig objective{};
    OptimizerConfig optimizer{};
};

/// A single corpus metric used as-is (no training).
struct FixedMetricMethod {
    std::size_t metric = 0;
};

struct Method {
    std::string name;
    std::variant<HeuristicMethod, GradientMethod, FixedMetricMethod> spec;
};

struct FoldResult {
    std::string experiment_id;
    std::string method;
    OutcomeLabel label = OutcomeLabel::Unknown;
    double z = 0.0;  ///< corrected z on the held-out experiment
    double p_one_tailed = 1.0;
    double p_two_tailed = 1.0;
};

struct LoocvOptions {
    std::size_t threads = 0;  ///< 0 = POWERLEARN_THREADS / hardware default
};

struct LoocvResult {
    std::vector<FoldResult> folds;  ///< sorted by experiment id
    std::vector<std::string> warnings;
    std::size_t models_trained = 0;
};

/// Holds out each record in turn, trains on the rest, scores the held-out
/// record with `policy`. Records that cannot influence a method's objective
/// (unknown/A-A records for the heuristic, A-A records when lambda_aa = 0)
/// share the single model trained on every contributing record, which is the
/// model their own fold would produce.
LoocvResult loocv(const ExperimentCorpus& corpus, const Method& method, const CorrectionPolicy& policy,
                  const LoocvOptions& options = {});

FoldResult make_fold(std::string id, std::string method, OutcomeLabel label, double z);

enum class OutcomeClass {
    Agreement,     ///< known: significant in the vetted direction
    Inconclusive,  ///< known or unknown: type-II
    Disagreement,  ///< known: significant in the wrong direction (type-III)
    Significant,   ///< unknown: null rejected
    Rejected,      ///< A/A: null rejected (type-I)
    Accepted,      ///< A/A: null kept
};

std::string_view to_string(OutcomeClass c) noexcept;

OutcomeClass classify(const FoldResult& fold, OutcomeLabel label, SignificanceLevel alpha);

/// Default grid: 50 log-spaced levels in [1e-4, 0.2] plus 0.01 and 0.05 exactly.
std::vector<double> default_alpha_grid();

/// Rates per alpha. A curve is absent when its denominator partition is empty.
struct RateCurves {
    std::vector<double> alpha;
    std::optional<std::vector<double>> type_i;    ///< rejected fraction over A/A
    std::optional<std::vector<double>> type_ii;   ///< inconclusive fraction over known + unknown
    std::optional<std::vector<double>> type_iii;  ///< disagreement fraction over known
    std::optional<std::vector<double>> power;     ///< correct rejections over known + unknown
    std::optional<std::vector<double>> agreement; ///< agreement fraction over known
    std::optional<std::vector<double>> known_inconclusive;
};

RateCurves error_rates(std::span<const FoldResult> folds, std::span<const double> alpha_grid);

/// A set of M metrics rejects at alpha when any member rejects at alpha / M.
/// Known experiments count as power only through correct-direction rejections;
/// if every rejecting member points the wrong way the outcome is a type-III.
RateCurves set_power(std::span<const std::vector<FoldResult>> members, std::span<const double> alpha_grid);

/// r^2 with r = candidate / reference.
double sample_size_ratio(double z_candidate, double z_reference);

/// Per alpha: mean over known + unknown experiments of each set's maximum
/// corrected z after the Bonferroni-across-members rescaling (known: signed,
/// unknown: absolute), then the squared ratio candidate / reference.
std::vector<double> sample_size_ratio_curve(std::span<const std::vector<FoldResult>> candidate,
                                            std::span<const std::vector<FoldResult>> reference,
                                            std::span<const double> alpha_grid);

struct SensitivitySummary {
    std::size_t count = 0;
    double mean_z = 0.0;
    double median_z = 0.0;
    double mean_abs_z = 0.0;
    double median_abs_z = 0.0;
    double mean_p = 0.0;    ///< one-tailed
    double median_p = 0.0;  ///< one-tailed
};

/// Summary over the known folds among `folds`. Throws if there are none.
SensitivitySummary sensitivity_summary(std::span<const FoldResult> folds);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Full evaluation run

struct EvaluationConfig {
    std::vector<double> alpha_grid = default_alpha_grid();
    std::vector<Method> methods;  ///< learnt methods; baselines are added automatically
    CorrectionPolicy correction{};
    bool include_north_star = true;
    bool include_top_proxy = true;
    /// Member names per set ("north_star", "top_proxy" or a method name).
    /// Empty: {north_star}, {north_star, top_proxy}, {north_star, top_proxy, m}
    /// for every unflagged learnt method m.
    std::vector<std::vector<std::string>> sets;
    bool exclude_flagged = true;
    double flag_alpha = 0.05;
    double top_proxy_lambda_unknown = 0.5;
    LoocvOptions loocv{};
};

struct MethodReport {
    std::string name;
    bool baseline = false;
    std::vector<FoldResult> folds;
    RateCurves curves;
    std::optional<SensitivitySummary> sensitivity;
    bool flagged = false;  ///< any type-III at flag_alpha
    std::vector<std::string> warnings;
};

struct SetReport {
    std::string name;
    std::vector<std::string> members;
    std::vector<std::string> excluded;  ///< flagged members removed from the set
    RateCurves curves;
    std::optional<std::vector<double>> sample_size_ratio;  ///< vs north star alone
};

struct EvaluationReport {
    std::vector<double> alpha_grid;
    CorrectionPolicy correction{};
    std::string north_star;
    std::string top_proxy;
    std::vector<MethodReport> methods;
    std::vector<SetReport> sets;

    const MethodReport* method(std::string_view name) const;
    const SetReport* set(std::string_view name) const;
};

/// Input metric with the lowest log-p loss on the whole corpus (one-hot weights,
/// no spherical penalty). Returns its corpus metric index.
std::size_t select_top_proxy(const ExperimentCorpus& corpus, const CorrectionPolicy& policy,
                             double lambda_unknown);

EvaluationReport evaluate(const ExperimentCorpus& corpus, const EvaluationConfig& cfg);

/// Writes report.json, sensitivity.csv and one alpha,value CSV per curve
/// under out_dir/curves/.
void write_report(const EvaluationReport& report, const std::filesystem::path& out_dir);
std::string report_json(const EvaluationReport& report);

}  // namespace powerlearn
