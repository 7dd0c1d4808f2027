#include "powerlearn/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <set>

#include "powerlearn/errors.hpp"
#include "powerlearn/parallel.hpp"

namespace powerlearn {
namespace {

using ordered_json = nlohmann::ordered_json;

OutcomeClass classify_level(double p_one, double p_two, OutcomeLabel label, double level) {
    switch (label) {
        case OutcomeLabel::Known:
            if (p_one < level / 2.0) return OutcomeClass::Agreement;
            if (p_one > 1.0 - level / 2.0) return OutcomeClass::Disagreement;
            return OutcomeClass::Inconclusive;
        case OutcomeLabel::Unknown:
            return p_two < level ? OutcomeClass::Significant : OutcomeClass::Inconclusive;
        case OutcomeLabel::AA:
            return p_two < level ? OutcomeClass::Rejected : OutcomeClass::Accepted;
    }
    return OutcomeClass::Inconclusive;
}

// Folds of every member, aligned to the experiment order of the first member.
std::vector<std::vector<const FoldResult*>> align_members(std::span<const std::span<const FoldResult>> members) {
    if (members.empty()) throw InvalidArgument("metric set has no members");
    const auto& first = members.front();
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < first.size(); ++i) position.emplace(first[i].experiment_id, i);
    if (position.size() != first.size()) throw InvalidArgument("metric set: duplicate experiment ids in folds");

    std::vector<std::vector<const FoldResult*>> rows(first.size(), std::vector<const FoldResult*>(members.size()));
    for (std::size_t m = 0; m < members.size(); ++m) {
        if (members[m].size() != first.size()) {
            throw InvalidArgument("metric set: members cover different experiments");
        }
        for (const auto& fold : members[m]) {
            auto it = position.find(fold.experiment_id);
            if (it == position.end() || rows[it->second][m] != nullptr) {
                throw InvalidArgument("metric set: members cover different experiments (" + fold.experiment_id + ")");
            }
            rows[it->second][m] = &fold;
        }
    }
    return rows;
}

RateCurves rates(std::span<const std::span<const FoldResult>> members, std::span<const double> alpha_grid) {
    const auto rows = align_members(members);
    const double m = static_cast<double>(members.size());
    std::size_t n_known = 0, n_unknown = 0, n_aa = 0;
    for (const auto& row : rows) {
        switch (row.front()->label) {
            case OutcomeLabel::Known:
                ++n_known;
                break;
            case OutcomeLabel::Unknown:
                ++n_unknown;
                break;
            case OutcomeLabel::AA:
                ++n_aa;
                break;
        }
    }

    RateCurves out;
    out.alpha.assign(alpha_grid.begin(), alpha_grid.end());
    std::vector<double> type_i, type_ii, type_iii, power, agreement, known_inconclusive;
    for (double alpha : alpha_grid) {
        SignificanceLevel checked(alpha);
        const double level = checked.value() / m;
        std::size_t agree = 0, disagree = 0, inconclusive = 0, significant = 0, rejected = 0;
        for (const auto& row : rows) {
            const OutcomeLabel label = row.front()->label;
            bool any_positive = false, any_negative = false, any_reject = false;
            for (const FoldResult* f : row) {
                const OutcomeClass c = classify_level(f->p_one_tailed, f->p_two_tailed, label, level);
                any_positive |= c == OutcomeClass::Agreement;
                any_negative |= c == OutcomeClass::Disagreement;
                any_reject |= c == OutcomeClass::Significant || c == OutcomeClass::Rejected;
            }
            switch (label) {
                case OutcomeLabel::Known:
                    if (any_positive) {
                        ++agree;
                    } else if (any_negative) {
                        ++disagree;
                    } else {
                        ++inconclusive;
                    }
                    break;
                case OutcomeLabel::Unknown:
                    if (any_reject) ++significant;
                    break;
                case OutcomeLabel::AA:
                    if (any_reject) ++rejected;
                    break;
            }
        }
        const auto frac = [](std::size_t num, std::size_t den) { return static_cast<double>(num) / static_cast<double>(den); };
        if (n_aa) type_i.push_back(frac(rejected, n_aa));
        if (n_known + n_unknown) {
            type_ii.push_back(frac(inconclusive + (n_unknown - significant), n_known + n_unknown));
            power.push_back(frac(agree + significant, n_known + n_unknown));
        }
        if (n_known) {
            type_iii.push_back(frac(disagree, n_known));
            agreement.push_back(frac(agree, n_known));
            known_inconclusive.push_back(frac(inconclusive, n_known));
        }
    }
    if (n_aa) out.type_i = std::move(type_i);
    if (n_known + n_unknown) {
        out.type_ii = std::move(type_ii);
        out.power = std::move(power);
    }
    if (n_known) {
        out.type_iii = std::move(type_iii);
        out.agreement = std::move(agreement);
        out.known_inconclusive = std::move(known_inconclusive);
    }
    return out;
}

std::vector<std::span<const FoldResult>> as_spans(std::span<const std::vector<FoldResult>> members) {
    return {members.begin(), members.end()};
}

// Mean over known + unknown experiments of the set's Bonferroni-rescaled max z.
double set_mean_z(std::span<const std::span<const FoldResult>> members, double alpha) {
    const auto rows = align_members(members);
    const double factor = bonferroni_factor(static_cast<std::int64_t>(members.size()), SignificanceLevel(alpha));
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& row : rows) {
        const OutcomeLabel label = row.front()->label;
        if (label == OutcomeLabel::AA) continue;
        double best = -std::numeric_limits<double>::infinity();
        for (const FoldResult* f : row) best = std::max(best, label == OutcomeLabel::Known ? f->z : std::abs(f->z));
        sum += best * factor;
        ++count;
    }
    if (count == 0) throw InvalidArgument("sample size ratio: no known or unknown experiments");
    return sum / static_cast<double>(count);
}

bool contributes(const Method& method, OutcomeLabel label) {
    if (const auto* g = std::get_if<GradientMethod>(&method.spec)) {
        switch (label) {
            case OutcomeLabel::Known:
                return true;
            case OutcomeLabel::Unknown:
                return g->objective.lambda_unknown > 0.0;
            case OutcomeLabel::AA:
                return g->objective.lambda_aa > 0.0;
        }
    }
    return label == OutcomeLabel::Known;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

ordered_json curves_json(const RateCurves& c) {
    ordered_json out;
    auto put = [&](const char* key, const std::optional<std::vector<double>>& v) {
        out[key] = v ? ordered_json(*v) : ordered_json(nullptr);
    };
    put("type_i", c.type_i);
    put("type_ii", c.type_ii);
    put("type_iii", c.type_iii);
    put("power", c.power);
    put("agreement", c.agreement);
    put("known_inconclusive", c.known_inconclusive);
    return out;
}

void write_curve(const std::filesystem::path& path, std::span<const double> alpha, std::span<const double> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
    out << "alpha,value\n";
    for (std::size_t i = 0; i < alpha.size(); ++i) out << format_double(alpha[i]) << ',' << format_double(values[i]) << '\n';
}

void write_curves(const std::filesystem::path& dir, const std::string& prefix, const RateCurves& c) {
    auto put = [&](const char* key, const std::optional<std::vector<double>>& v) {
        if (v) write_curve(dir / (prefix + "." + key + ".csv"), c.alpha, *v);
    };
    put("type_i", c.type_i);
    put("type_ii", c.type_ii);
    put("type_iii", c.type_iii);
    put("power", c.power);
    put("agreement", c.agreement);
    put("known_inconclusive", c.known_inconclusive);
}

}  // namespace

FoldResult make_fold(std::string id, std::string method, OutcomeLabel label, double z) {
    return FoldResult{std::move(id), std::move(method), label, z, one_tailed_p(z), two_tailed_p(z)};
}

LoocvResult loocv(const ExperimentCorpus& corpus, const Method& method, const CorrectionPolicy& policy,
                  const LoocvOptions& options) {
    LoocvResult result;
    const auto& records = corpus.records;

    if (const auto* fixed = std::get_if<FixedMetricMethod>(&method.spec)) {
        for (const auto& rec : records) {
            try {
                result.folds.push_back(make_fold(rec.id, method.name, rec.label, corrected_z(rec, fixed->metric, policy)));
            } catch (const DegenerateVariance& e) {
                result.warnings.push_back("fold '" + rec.id + "' skipped: " + e.what());
            }
        }
    } else {
        const auto n_known = std::count_if(records.begin(), records.end(),
                                           [](const auto& r) { return r.label == OutcomeLabel::Known; });
        if (n_known < 2) throw InvalidArgument("loocv: at least two records with known outcomes are required");

        std::vector<PreparedExperiment> prepared;
        prepared.reserve(records.size());
        for (const auto& rec : records) prepared.push_back(prepare(rec, corpus.input_indices));

        std::vector<std::size_t> contributing;
        std::vector<std::size_t> job_of(records.size(), 0);
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (contributes(method, records[i].label)) {
                contributing.push_back(i);
                job_of[i] = contributing.size();  // job 0 holds nothing out
            }
        }

        struct JobOutcome {
            std::optional<MetricWeights> weights;
            std::vector<std::string> warnings;
        };
        std::vector<JobOutcome> jobs(contributing.size() + 1);

        parallel_for(jobs.size(), options.threads, [&](std::size_t job) {
            const std::size_t held_out = job == 0 ? records.size() : contributing[job - 1];
            TrainingSet set;
            for (std::size_t i : contributing) {
                if (i == held_out) continue;
                switch (prepared[i].label) {
                    case OutcomeLabel::Known:
                        set.known.push_back(prepared[i]);
                        break;
                    case OutcomeLabel::Unknown:
                        set.unknown.push_back(prepared[i]);
                        break;
                    case OutcomeLabel::AA:
                        set.aa.push_back(prepared[i]);
                        break;
                }
            }
            JobOutcome& out = jobs[job];
            const std::string tag = job == 0 ? std::string("full model") : "fold '" + records[held_out].id + "'";
            if (set.known.empty()) {
                out.warnings.push_back(tag + " skipped: empty effective training set");
                return;
            }
            try {
                if (const auto* h = std::get_if<HeuristicMethod>(&method.spec)) {
                    HeuristicFit fit = heuristic_weights(set.known, h->shrinkage);
                    for (auto& w : fit.warnings) out.warnings.push_back(tag + ": " + w);
                    out.weights = std::move(fit.weights);
                } else {
                    const auto& g = std::get<GradientMethod>(method.spec);
                    out.weights = train(set, g.objective, g.optimizer).weights;
                }
            } catch (const std::runtime_error& e) {
                out.warnings.push_back(tag + " skipped: " + e.what());
            }
        });
        result.models_trained = jobs.size();

        for (const auto& job : jobs) {
            result.warnings.insert(result.warnings.end(), job.warnings.begin(), job.warnings.end());
        }
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& weights = jobs[job_of[i]].weights;
            if (!weights) {
                if (job_of[i] == 0) result.warnings.push_back("fold '" + records[i].id + "' skipped: no full model");
                continue;
            }
            try {
                const double z = corrected_z(prepared[i], weights->span(), policy);
                result.folds.push_back(make_fold(records[i].id, method.name, records[i].label, z));
            } catch (const DegenerateVariance& e) {
                result.warnings.push_back("fold '" + records[i].id + "' skipped: " + e.what());
            }
        }
    }
    std::sort(result.folds.begin(), result.folds.end(),
              [](const FoldResult& a, const FoldResult& b) { return a.experiment_id < b.experiment_id; });
    return result;
}

std::string_view to_string(OutcomeClass c) noexcept {
    switch (c) {
        case OutcomeClass::Agreement:
            return "agreement";
        case OutcomeClass::Inconclusive:
            return "inconclusive";
        case OutcomeClass::Disagreement:
            return "disagreement";
        case OutcomeClass::Significant:
            return "significant";
        case OutcomeClass::Rejected:
            return "rejected";
        case OutcomeClass::Accepted:
            return "accepted";
    }
    return "unknown";
}

OutcomeClass classify(const FoldResult& fold, OutcomeLabel label, SignificanceLevel alpha) {
    return classify_level(fold.p_one_tailed, fold.p_two_tailed, label, alpha.value());
}

std::vector<double> default_alpha_grid() {
    constexpr int kPoints = 50;
    const double lo = std::log(1e-4);
    const double hi = std::log(0.2);
    std::set<double> grid{0.01, 0.05};
    for (int i = 0; i < kPoints; ++i) {
        grid.insert(i == kPoints - 1 ? 0.2 : std::exp(lo + (hi - lo) * i / (kPoints - 1)));
    }
    return {grid.begin(), grid.end()};
}

RateCurves error_rates(std::span<const FoldResult> folds, std::span<const double> alpha_grid) {
    if (folds.empty()) throw InvalidArgument("error_rates: no folds");
    const std::span<const FoldResult> members[] = {folds};
    return rates(members, alpha_grid);
}

RateCurves set_power(std::span<const std::vector<FoldResult>> members, std::span<const double> alpha_grid) {
    return rates(as_spans(members), alpha_grid);
}

double sample_size_ratio(double z_candidate, double z_reference) {
    if (z_reference == 0.0) throw InvalidArgument("sample_size_ratio: reference z is zero");
    const double r = z_candidate / z_reference;
    return r * r;
}

std::vector<double> sample_size_ratio_curve(std::span<const std::vector<FoldResult>> candidate,
                                            std::span<const std::vector<FoldResult>> reference,
                                            std::span<const double> alpha_grid) {
    const auto cand = as_spans(candidate);
    const auto ref = as_spans(reference);
    std::vector<double> out;
    out.reserve(alpha_grid.size());
    for (double alpha : alpha_grid) {
        out.push_back(sample_size_ratio(set_mean_z(cand, alpha), set_mean_z(ref, alpha)));
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("median of an empty sequence");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SensitivitySummary sensitivity_summary(std::span<const FoldResult> folds) {
    std::vector<double> z, abs_z, p;
    for (const auto& f : folds) {
        if (f.label != OutcomeLabel::Known) continue;
        z.push_back(f.z);
        abs_z.push_back(std::abs(f.z));
        p.push_back(f.p_one_tailed);
    }
    if (z.empty()) throw InvalidArgument("sensitivity_summary: no folds with known outcomes");
    const auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    SensitivitySummary s;
    s.count = z.size();
    s.mean_z = mean(z);
    s.median_z = median(z);
    s.mean_abs_z = mean(abs_z);
    s.median_abs_z = median(abs_z);
    s.mean_p = mean(p);
    s.median_p = median(p);
    return s;
}

const MethodReport* EvaluationReport::method(std::string_view name) const {
    for (const auto& m : methods) {
        if (m.name == name) return &m;
    }
    return nullptr;
}

const SetReport* EvaluationReport::set(std::string_view name) const {
    for (const auto& s : sets) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::size_t select_top_proxy(const ExperimentCorpus& corpus, const CorrectionPolicy& policy, double lambda_unknown) {
    const TrainingSet data = make_training_set(partition(corpus), corpus.input_indices);
    ObjectiveConfig cfg;
    cfg.kind = ObjectiveKind::LogPValue;
    cfg.lambda_unknown = lambda_unknown;
    cfg.lambda_aa = 0.0;
    cfg.delta = 0.0;
    cfg.correction = policy;
    const Objective objective(data, cfg);

    const std::size_t n = corpus.input_indices.size();
    std::optional<std::size_t> best;
    double best_loss = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> w(n, 0.0);
        w[i] = 1.0;
        double loss;
        try {
            loss = objective.value(w);
        } catch (const DegenerateVariance&) {
            continue;
        }
        if (!best || loss < best_loss) {
            best = i;
            best_loss = loss;
        }
    }
    if (!best) throw DegenerateVariance("select_top_proxy: no input metric has positive variance");
    return corpus.input_indices[*best];
}

EvaluationReport evaluate(const ExperimentCorpus& corpus, const EvaluationConfig& cfg) {
    EvaluationReport report;
    report.alpha_grid = cfg.alpha_grid;
    report.correction = cfg.correction;
    const auto& names = corpus.metric_names();
    report.north_star = names.at(corpus.north_star_index);

    std::vector<Method> methods;
    if (cfg.include_north_star) methods.push_back({"north_star", FixedMetricMethod{corpus.north_star_index}});
    if (cfg.include_top_proxy) {
        const std::size_t idx = select_top_proxy(corpus, cfg.correction, cfg.top_proxy_lambda_unknown);
        report.top_proxy = names.at(idx);
        methods.push_back({"top_proxy", FixedMetricMethod{idx}});
    }
    const std::size_t n_baselines = methods.size();
    for (const auto& m : cfg.methods) {
        for (const auto& existing : methods) {
            if (existing.name == m.name) throw InvalidArgument("duplicate method name '" + m.name + "'");
        }
        methods.push_back(m);
    }

    for (std::size_t i = 0; i < methods.size(); ++i) {
        LoocvResult lr = loocv(corpus, methods[i], cfg.correction, cfg.loocv);
        MethodReport mr;
        mr.name = methods[i].name;
        mr.baseline = i < n_baselines;
        mr.folds = std::move(lr.folds);
        mr.warnings = std::move(lr.warnings);
        if (!mr.folds.empty()) {
            mr.curves = error_rates(mr.folds, cfg.alpha_grid);
            if (std::any_of(mr.folds.begin(), mr.folds.end(), [](const auto& f) { return f.label == OutcomeLabel::Known; })) {
                mr.sensitivity = sensitivity_summary(mr.folds);
            }
            const SignificanceLevel flag_level(cfg.flag_alpha);
            mr.flagged = std::any_of(mr.folds.begin(), mr.folds.end(), [&](const FoldResult& f) {
                return f.label == OutcomeLabel::Known && classify(f, f.label, flag_level) == OutcomeClass::Disagreement;
            });
        } else {
            mr.curves.alpha = cfg.alpha_grid;
        }
        report.methods.push_back(std::move(mr));
    }

    std::vector<std::vector<std::string>> sets = cfg.sets;
    if (sets.empty()) {
        if (cfg.include_north_star) sets.push_back({"north_star"});
        if (cfg.include_north_star && cfg.include_top_proxy) sets.push_back({"north_star", "top_proxy"});
        for (std::size_t i = n_baselines; i < report.methods.size(); ++i) {
            if (cfg.exclude_flagged && report.methods[i].flagged) continue;
            std::vector<std::string> s;
            if (cfg.include_north_star) s.push_back("north_star");
            if (cfg.include_top_proxy) s.push_back("top_proxy");
            s.push_back(report.methods[i].name);
            sets.push_back(std::move(s));
        }
    }

    const MethodReport* north_star = report.method("north_star");
    for (const auto& requested : sets) {
        SetReport sr;
        std::vector<std::vector<FoldResult>> member_folds;
        for (const auto& name : requested) {
            const MethodReport* m = report.method(name);
            if (!m) throw InvalidArgument("metric set refers to unknown method '" + name + "'");
            if (cfg.exclude_flagged && m->flagged && name != "north_star") {
                sr.excluded.push_back(name);
                continue;
            }
            sr.members.push_back(name);
            member_folds.push_back(m->folds);
        }
        for (const auto& name : requested) sr.name += (sr.name.empty() ? "" : "+") + name;
        sr.curves.alpha = cfg.alpha_grid;
        if (!member_folds.empty() && !member_folds.front().empty()) {
            sr.curves = set_power(member_folds, cfg.alpha_grid);
            if (north_star && !north_star->folds.empty() && sr.curves.power) {
                const std::vector<FoldResult> reference[] = {north_star->folds};
                try {
                    sr.sample_size_ratio = sample_size_ratio_curve(member_folds, reference, cfg.alpha_grid);
                } catch (const InvalidArgument&) {
                    // reference z averages to zero; ratio undefined
                }
            }
        }
        report.sets.push_back(std::move(sr));
    }
    return report;
}

std::string report_json(const EvaluationReport& report) {
    ordered_json j;
    j["alpha_grid"] = report.alpha_grid;
    j["correction"] = {{"bonferroni_over_treatments", report.correction.bonferroni_over_treatments},
                       {"avi", report.correction.avi},
                       {"alpha", report.correction.alpha.value()}};
    j["north_star"] = report.north_star;
    j["top_proxy"] = report.top_proxy;
    ordered_json methods = ordered_json::array();
    for (const auto& m : report.methods) {
        ordered_json mj;
        mj["name"] = m.name;
        mj["baseline"] = m.baseline;
        mj["flagged_type_iii"] = m.flagged;
        mj["warnings"] = m.warnings;
        if (m.sensitivity) {
            const auto& s = *m.sensitivity;
            mj["sensitivity"] = {{"count", s.count},           {"mean_z", s.mean_z},
                                 {"median_z", s.median_z},     {"mean_abs_z", s.mean_abs_z},
                                 {"median_abs_z", s.median_abs_z}, {"mean_p_one_tailed", s.mean_p},
                                 {"median_p_one_tailed", s.median_p}};
        } else {
            mj["sensitivity"] = nullptr;
        }
        mj["curves"] = curves_json(m.curves);
        ordered_json folds = ordered_json::array();
        for (const auto& f : m.folds) {
            folds.push_back({{"id", f.experiment_id},
                             {"label", to_string(f.label)},
                             {"z", f.z},
                             {"p_one_tailed", f.p_one_tailed},
                             {"p_two_tailed", f.p_two_tailed}});
        }
        mj["folds"] = std::move(folds);
        methods.push_back(std::move(mj));
    }
    j["methods"] = std::move(methods);
    ordered_json sets = ordered_json::array();
    for (const auto& s : report.sets) {
        ordered_json sj;
        sj["name"] = s.name;
        sj["members"] = s.members;
        sj["excluded"] = s.excluded;
        sj["curves"] = curves_json(s.curves);
        sj["sample_size_ratio"] = s.sample_size_ratio ? ordered_json(*s.sample_size_ratio) : ordered_json(nullptr);
        sets.push_back(std::move(sj));
    }
    j["sets"] = std::move(sets);
    return j.dump(2) + "\n";
}

void write_report(const EvaluationReport& report, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "curves");
    {
        std::ofstream out(out_dir / "report.json", std::ios::binary | std::ios::trunc);
        if (!out) throw InvalidArgument("cannot write report into '" + out_dir.string() + "'");
        out << report_json(report);
    }
    {
        std::ofstream out(out_dir / "sensitivity.csv", std::ios::binary | std::ios::trunc);
        out << "method,count,mean_z,median_z,mean_abs_z,median_abs_z,mean_p_one_tailed,median_p_one_tailed\n";
        for (const auto& m : report.methods) {
            if (!m.sensitivity) continue;
            const auto& s = *m.sensitivity;
            out << m.name << ',' << s.count << ',' << format_double(s.mean_z) << ',' << format_double(s.median_z)
                << ',' << format_double(s.mean_abs_z) << ',' << format_double(s.median_abs_z) << ','
                << format_double(s.mean_p) << ',' << format_double(s.median_p) << '\n';
        }
    }
    for (const auto& m : report.methods) write_curves(out_dir / "curves", m.name, m.curves);
    for (const auto& s : report.sets) {
        write_curves(out_dir / "curves", "set." + s.name, s.curves);
        if (s.sample_size_ratio) {
            write_curve(out_dir / "curves" / ("set." + s.name + ".sample_size_ratio.csv"), report.alpha_grid,
                        *s.sample_size_ratio);
        }
    }
}

}  // namespace powerlearn
