#include "cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "manifest.hpp"
#include "powerlearn/errors.hpp"
#include "powerlearn/evaluation.hpp"
#include "powerlearn/heuristic.hpp"
#include "powerlearn/synthgen.hpp"
#include "powerlearn/trainer.hpp"

namespace powerlearn::cli {
namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct CorrectionFlags {
    double alpha = 0.05;
    bool no_bonferroni = false;
    bool avi = false;

    void add(CLI::App* app) {
        app->add_option("--alpha", alpha, "Significance level used by the corrections")->capture_default_str();
        app->add_flag("--no-bonferroni", no_bonferroni, "Disable the Bonferroni correction over treatments");
        app->add_flag("--avi", avi, "Apply the always-valid-inference z shrinkage");
    }
    CorrectionPolicy policy() const {
        CorrectionPolicy p;
        p.alpha = SignificanceLevel(alpha);
        p.bonferroni_over_treatments = !no_bonferroni;
        p.avi = avi;
        return p;
    }
};

ordered_json to_json(const CorrectionPolicy& p) {
    return {{"bonferroni_over_treatments", p.bonferroni_over_treatments}, {"avi", p.avi}, {"alpha", p.alpha.value()}};
}

struct OptimizerFlags {
    std::string init = "good";
    double lr = 5e-4;
    long halving = 1000;
    long convergence = 10000;
    long max_steps = 1'000'000;
    std::uint64_t seed = 0;
    double delta = 5e-4;
    double lambda_unknown = 0.5;
    double lambda_aa = 0.0;

    void add(CLI::App* app) {
        app->add_option("--init", init, "Initialisation: good, constant or bad")
            ->check(CLI::IsMember({"good", "constant", "bad"}))
            ->capture_default_str();
        app->add_option("--lr", lr, "Initial Adam learning rate")->capture_default_str();
        app->add_option("--halving-patience", halving, "Steps without improvement before halving the rate")
            ->capture_default_str();
        app->add_option("--convergence-patience", convergence, "Steps without improvement before stopping")
            ->capture_default_str();
        app->add_option("--max-steps", max_steps, "Hard step limit")->capture_default_str();
        app->add_option("--delta", delta, "Spherical regularisation strength")->capture_default_str();
        app->add_option("--lambda-unknown", lambda_unknown, "Weight of the unknown-outcome loss")
            ->capture_default_str();
        app->add_option("--lambda-aa", lambda_aa, "Weight of the A/A loss")->capture_default_str();
    }
    static constexpr const char* kNames[] = {"--init",  "--lr",           "--halving-patience", "--convergence-patience",
                                             "--max-steps", "--delta", "--lambda-unknown", "--lambda-aa"};

    OptimizerConfig optimizer() const {
        OptimizerConfig o;
        o.initial_learning_rate = lr;
        o.halving_patience = halving;
        o.convergence_patience = convergence;
        o.max_steps = max_steps;
        o.seed = seed;
        o.init_strategy = init == "bad" ? InitStrategy::Bad : init == "constant" ? InitStrategy::Constant
                                                                                 : InitStrategy::Good;
        return o;
    }
    ObjectiveConfig objective(ObjectiveKind kind, const CorrectionPolicy& policy) const {
        ObjectiveConfig c;
        c.kind = kind;
        c.delta = delta;
        c.lambda_unknown = lambda_unknown;
        c.lambda_aa = lambda_aa;
        c.correction = policy;
        return c;
    }
    ordered_json to_json() const {
        return {{"init", init},
                {"learning_rate", lr},
                {"halving_patience", halving},
                {"convergence_patience", convergence},
                {"max_steps", max_steps},
                {"delta", delta},
                {"lambda_unknown", lambda_unknown},
                {"lambda_aa", lambda_aa}};
    }
};

std::optional<ObjectiveKind> parse_kind(const std::string& name) {
    if (name == "zscore") return ObjectiveKind::ZScore;
    if (name == "pvalue") return ObjectiveKind::PValue;
    if (name == "logp") return ObjectiveKind::LogPValue;
    return std::nullopt;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, sep)) {
        if (!cur.empty()) parts.push_back(cur);
    }
    return parts;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

ExperimentCorpus load_checked(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ValidationError("corpus file '" + path.string() + "' does not exist");
    return load_corpus(path);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << text;
}

// ---------------------------------------------------------------------------

struct GenerateCommand {
    GeneratorConfig cfg;
    std::string out;
    long adversarial_metric = -1;
    bool no_adversarial = false;
    AdversarialConfig adversarial;

    void add(CLI::App* app) {
        adversarial = *cfg.adversarial;
        app->add_option("--out", out, "Output corpus (JSON Lines)")->required();
        app->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
        app->add_option("--n-metrics", cfg.n_metrics, "Metrics including the North Star")->capture_default_str();
        app->add_option("--n-known", cfg.n_known)->capture_default_str();
        app->add_option("--n-unknown", cfg.n_unknown)->capture_default_str();
        app->add_option("--n-aa", cfg.n_aa)->capture_default_str();
        app->add_option("--users-min", cfg.users_min, "Smallest variant size")->capture_default_str();
        app->add_option("--users-max", cfg.users_max, "Largest variant size")->capture_default_str();
        app->add_option("--north-star-sensitivity", cfg.north_star_sensitivity)->capture_default_str();
        app->add_option("--proxy-sensitivities", cfg.proxy_sensitivities, "One value per input metric")
            ->delimiter(',');
        app->add_option("--adversarial-metric", adversarial_metric, "Corpus index of the adversarial metric");
        app->add_flag("--no-adversarial", no_adversarial);
        app->add_option("--adversarial-base", adversarial.base_sensitivity)->capture_default_str();
        app->add_option("--adversarial-burst", adversarial.burst_sensitivity)->capture_default_str();
        app->add_option("--adversarial-burst-probability", adversarial.burst_probability)->capture_default_str();
        app->add_option("--noise-scale", cfg.noise_scale)->capture_default_str();
        app->add_option("--factor-rank", cfg.factor_rank)->capture_default_str();
        app->add_option("--treatments-min", cfg.treatments_min)->capture_default_str();
        app->add_option("--treatments-max", cfg.treatments_max)->capture_default_str();
        app->add_option("--effect-min", cfg.effect_min)->capture_default_str();
        app->add_option("--effect-max", cfg.effect_max)->capture_default_str();
        app->add_option("--label-alpha", cfg.label_alpha)->capture_default_str();
        app->add_option("--max-attempts", cfg.max_attempts)->capture_default_str();
    }

    ordered_json config_json() const {
        ordered_json j{{"n_metrics", cfg.n_metrics},
                       {"n_known", cfg.n_known},
                       {"n_unknown", cfg.n_unknown},
                       {"n_aa", cfg.n_aa},
                       {"users_min", cfg.users_min},
                       {"users_max", cfg.users_max},
                       {"north_star_sensitivity", cfg.north_star_sensitivity},
                       {"proxy_sensitivities", cfg.proxy_sensitivities},
                       {"noise_scale", cfg.noise_scale},
                       {"factor_rank", cfg.factor_rank},
                       {"treatments_min", cfg.treatments_min},
                       {"treatments_max", cfg.treatments_max},
                       {"effect_min", cfg.effect_min},
                       {"effect_max", cfg.effect_max},
                       {"label_alpha", cfg.label_alpha},
                       {"max_attempts", cfg.max_attempts},
                       {"seed", cfg.seed}};
        if (cfg.adversarial) {
            const auto& a = *cfg.adversarial;
            j["adversarial"] = {{"metric", a.metric},
                                {"base_sensitivity", a.base_sensitivity},
                                {"burst_sensitivity", a.burst_sensitivity},
                                {"burst_probability", a.burst_probability}};
        } else {
            j["adversarial"] = nullptr;
        }
        return j;
    }

    int execute(RunManifest& manifest, std::ostream& out_stream) {
        if (no_adversarial) {
            cfg.adversarial.reset();
        } else {
            if (adversarial_metric >= 0) adversarial.metric = static_cast<std::size_t>(adversarial_metric);
            cfg.adversarial = adversarial;
        }
        if (cfg.proxy_sensitivities.size() != cfg.n_metrics - 1 && cfg.n_metrics >= 2) {
            // Default list sized for 11 metrics: stretch or trim it to match.
            cfg.proxy_sensitivities.resize(cfg.n_metrics - 1, 0.0);
        }
        manifest.config = config_json();
        manifest.seed = cfg.seed;
        const ExperimentCorpus corpus = generate_corpus(cfg);
        save_corpus(corpus, out);
        manifest.corpus_sha256 = sha256_file(out);
        manifest.outputs = {out};
        out_stream << "wrote " << corpus.records.size() << " records to " << out << '\n';
        return kOk;
    }
    fs::path manifest_path() const { return fs::path(out + ".manifest.json"); }
};

struct TrainCommand {
    std::string corpus;
    std::string method = "logp";
    std::string out;
    double epsilon = 0.01;
    CorrectionFlags correction;
    OptimizerFlags opt;
    CLI::App* app = nullptr;

    void add(CLI::App* sub) {
        app = sub;
        sub->add_option("--corpus", corpus, "Input corpus (JSON Lines)")->required();
        sub->add_option("--method", method, "heuristic, zscore, pvalue or logp")
            ->check(CLI::IsMember({"heuristic", "zscore", "pvalue", "logp"}))
            ->capture_default_str();
        sub->add_option("--out", out, "Output weights JSON")->required();
        sub->add_option("--shrinkage", epsilon, "Ridge term added before inversion (heuristic)")
            ->capture_default_str();
        sub->add_option("--seed", opt.seed, "Seed")->capture_default_str();
        correction.add(sub);
        opt.add(sub);
    }

    int execute(RunManifest& manifest, std::ostream& out_stream, std::ostream& err) {
        const CorrectionPolicy policy = correction.policy();
        ordered_json config{{"method", method}, {"correction", to_json(policy)}};
        manifest.seed = opt.seed;
        manifest.corpus_sha256 = sha256_file(corpus);
        const ExperimentCorpus data = load_checked(corpus);
        const TrainingSet set = make_training_set(partition(data), data.input_indices);
        if (set.known.empty()) throw ValidationError("corpus has no records with known outcomes");

        ordered_json weights_json;
        weights_json["method"] = method;
        weights_json["north_star"] = data.metric_names().at(data.north_star_index);
        MetricWeights weights;
        std::vector<std::pair<long, double>> trace;
        if (method == "heuristic") {
            for (const char* name : OptimizerFlags::kNames) {
                if (app->count(name) > 0) {
                    err << "warning: " << name << " is ignored by the heuristic method\n";
                }
            }
            config["shrinkage"] = epsilon;
            HeuristicFit fit = heuristic_weights(set.known, ShrinkageConfig{epsilon});
            for (const auto& w : fit.warnings) err << "warning: " << w << '\n';
            weights = std::move(fit.weights);
        } else {
            const ObjectiveConfig obj = opt.objective(*parse_kind(method), policy);
            config["optimizer"] = opt.to_json();
            const TrainedMetric trained = train(set, obj, opt.optimizer());
            weights = trained.weights;
            trace = trained.loss_trace;
            weights_json["final_loss"] = trained.final_loss;
            weights_json["steps"] = trained.steps_to_convergence;
            weights_json["best_step"] = trained.best_step;
            weights_json["converged"] = trained.converged;
        }
        manifest.config = config;

        ordered_json named = ordered_json::object();
        const auto names = data.input_names();
        for (std::size_t i = 0; i < names.size(); ++i) named[names[i]] = weights.values[i];
        weights_json["weights"] = std::move(named);
        write_text(out, weights_json.dump(2) + "\n");

        const fs::path trace_path = fs::path(out).replace_extension(".trace.csv");
        std::string csv = "step,loss\n";
        for (const auto& [step, loss] : trace) csv += std::to_string(step) + "," + format_double(loss) + "\n";
        write_text(trace_path, csv);
        manifest.outputs = {out, trace_path.string()};
        out_stream << "wrote weights for " << names.size() << " input metrics to " << out << '\n';
        return kOk;
    }
    fs::path manifest_path() const { return fs::path(out + ".manifest.json"); }
};

struct EvaluateCommand {
    std::string corpus;
    std::vector<std::string> methods{"heuristic", "logp"};
    std::vector<double> alpha_grid;
    std::vector<std::string> sets;
    std::string out_dir;
    double epsilon = 0.01;
    std::size_t threads = 0;
    bool keep_flagged = false;
    bool no_top_proxy = false;
    CorrectionFlags correction;
    OptimizerFlags opt;

    void add(CLI::App* sub) {
        sub->add_option("--corpus", corpus, "Input corpus (JSON Lines)")->required();
        sub->add_option("--methods", methods, "Learnt methods: heuristic, zscore, pvalue, logp")
            ->delimiter(',')
            ->check(CLI::IsMember({"heuristic", "zscore", "pvalue", "logp"}));
        sub->add_option("--alpha-grid", alpha_grid, "Comma-separated significance levels")->delimiter(',');
        sub->add_option("--sets", sets, "Metric sets, members joined by '+', sets separated by ','")
            ->delimiter(',');
        sub->add_option("--out-dir", out_dir, "Report directory")->required();
        sub->add_option("--shrinkage", epsilon)->capture_default_str();
        sub->add_option("--threads", threads, "Worker threads (0: POWERLEARN_THREADS or all cores)");
        sub->add_flag("--keep-flagged", keep_flagged, "Keep methods with type-III errors in metric sets");
        sub->add_flag("--no-top-proxy", no_top_proxy, "Skip the top-proxy baseline");
        sub->add_option("--seed", opt.seed, "Seed")->capture_default_str();
        correction.add(sub);
        opt.add(sub);
    }

    int execute(RunManifest& manifest, std::ostream& out_stream, std::ostream& err) {
        EvaluationConfig cfg;
        cfg.correction = correction.policy();
        if (!alpha_grid.empty()) {
            for (double a : alpha_grid) SignificanceLevel checked(a);
            cfg.alpha_grid = alpha_grid;
        }
        cfg.exclude_flagged = !keep_flagged;
        cfg.include_top_proxy = !no_top_proxy;
        cfg.top_proxy_lambda_unknown = opt.lambda_unknown;
        cfg.loocv.threads = threads;
        for (const auto& name : methods) {
            if (name == "heuristic") {
                cfg.methods.push_back({name, HeuristicMethod{ShrinkageConfig{epsilon}}});
            } else {
                cfg.methods.push_back({name, GradientMethod{opt.objective(*parse_kind(name), cfg.correction),
                                                            opt.optimizer()}});
            }
        }
        for (const auto& s : sets) cfg.sets.push_back(split(s, '+'));

        manifest.seed = opt.seed;
        manifest.config = {{"methods", methods},
                           {"alpha_grid", cfg.alpha_grid},
                           {"sets", sets},
                           {"correction", to_json(cfg.correction)},
                           {"shrinkage", epsilon},
                           {"optimizer", opt.to_json()},
                           {"exclude_flagged", cfg.exclude_flagged},
                           {"include_top_proxy", cfg.include_top_proxy}};
        manifest.corpus_sha256 = sha256_file(corpus);
        const ExperimentCorpus data = load_checked(corpus);
        const EvaluationReport report = evaluate(data, cfg);
        write_report(report, out_dir);
        for (const auto& m : report.methods) {
            for (const auto& w : m.warnings) err << "warning: " << m.name << ": " << w << '\n';
            if (m.flagged) err << "warning: " << m.name << " shows type-III disagreements\n";
        }
        manifest.outputs = {(fs::path(out_dir) / "report.json").string(), (fs::path(out_dir) / "sensitivity.csv").string(),
                            (fs::path(out_dir) / "curves").string()};
        out_stream << "wrote report for " << report.methods.size() << " methods to " << out_dir << '\n';
        return kOk;
    }
    fs::path manifest_path() const { return fs::path(out_dir) / "manifest.json"; }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learn and evaluate sensitive linear metrics from past online experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", tool_version());

    GenerateCommand generate;
    TrainCommand train_cmd;
    EvaluateCommand evaluate_cmd;
    auto* gen_app = app.add_subcommand("generate", "Write a synthetic experiment corpus");
    auto* train_app = app.add_subcommand("train", "Learn metric weights on a corpus");
    auto* eval_app = app.add_subcommand("evaluate", "Leave-one-out evaluation with error-rate curves");
    generate.add(gen_app);
    train_cmd.add(train_app);
    evaluate_cmd.add(eval_app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    RunManifest manifest;
    for (int i = 0; i < argc; ++i) manifest.command_line.emplace_back(argv[i]);
    manifest.started_at = utc_timestamp();
    try {
        int code = kOk;
        fs::path manifest_path;
        if (*gen_app) {
            code = generate.execute(manifest, out);
            manifest_path = generate.manifest_path();
        } else if (*train_app) {
            code = train_cmd.execute(manifest, out, err);
            manifest_path = train_cmd.manifest_path();
        } else {
            code = evaluate_cmd.execute(manifest, out, err);
            manifest_path = evaluate_cmd.manifest_path();
        }
        manifest.finished_at = utc_timestamp();
        manifest.save(manifest_path);
        return code;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::runtime_error& e) {
        // Diverged training, degenerate variance or direction, singular matrices, failed generation.
        err << "error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace powerlearn::cli
