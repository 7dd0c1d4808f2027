#include "powerlearn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <set>

#include "powerlearn/errors.hpp"
#include "powerlearn/kernels.hpp"

namespace powerlearn {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

template <typename T>
T field(const json& obj, const char* key, std::size_t line) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(line, std::string("missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ParseError(line, std::string("field '") + key + "': " + e.what());
    }
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, std::size_t line,
                          const char* key) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != n) {
            throw ParseError(line, std::string("field '") + key + "' is not a square matrix");
        }
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

ordered_json matrix_json(const Eigen::MatrixXd& m) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        out.push_back(std::move(row));
    }
    return out;
}

ExperimentRecord parse_record(const json& obj, std::size_t line) {
    if (!obj.is_object()) throw ParseError(line, "record is not a JSON object");
    ExperimentRecord rec;
    rec.id = field<std::string>(obj, "id", line);
    const auto label_text = field<std::string>(obj, "label", line);
    const auto label = parse_label(label_text);
    if (!label) throw ParseError(line, "unknown label '" + label_text + "'");
    rec.label = *label;
    rec.treatments = field<std::int64_t>(obj, "treatments", line);
    rec.metric_names = field<std::vector<std::string>>(obj, "metric_names", line);
    rec.a.n_samples = field<std::int64_t>(obj, "n_a", line);
    rec.b.n_samples = field<std::int64_t>(obj, "n_b", line);
    rec.a.means = to_vector(field<std::vector<double>>(obj, "mu_a", line));
    rec.b.means = to_vector(field<std::vector<double>>(obj, "mu_b", line));
    rec.a.cov = to_matrix(field<std::vector<std::vector<double>>>(obj, "cov_a", line), line, "cov_a");
    rec.b.cov = to_matrix(field<std::vector<std::vector<double>>>(obj, "cov_b", line), line, "cov_b");
    return rec;
}

}  // namespace

std::string_view to_string(OutcomeLabel label) noexcept {
    switch (label) {
        case OutcomeLabel::Known:
            return "known";
        case OutcomeLabel::Unknown:
            return "unknown";
        case OutcomeLabel::AA:
            return "aa";
    }
    return "unknown";
}

std::optional<OutcomeLabel> parse_label(std::string_view text) noexcept {
    if (text == "known") return OutcomeLabel::Known;
    if (text == "unknown") return OutcomeLabel::Unknown;
    if (text == "aa") return OutcomeLabel::AA;
    return std::nullopt;
}

const std::vector<std::string>& ExperimentCorpus::metric_names() const {
    static const std::vector<std::string> empty;
    return records.empty() ? empty : records.front().metric_names;
}

std::vector<std::string> ExperimentCorpus::input_names() const {
    const auto& names = metric_names();
    std::vector<std::string> out;
    for (std::size_t i : input_indices) out.push_back(i < names.size() ? names[i] : std::string{});
    return out;
}

void validate_record(ExperimentRecord& record) {
    auto fail = [&](const std::string& rule) {
        throw ValidationError("record '" + record.id + "': " + rule);
    };
    if (record.treatments < 1) fail("treatments must be >= 1");
    const auto n = static_cast<Eigen::Index>(record.metric_names.size());
    if (record.a.dimension() != n || record.b.dimension() != n) {
        fail("dimension: means do not match metric_names length");
    }
    for (VariantStats* v : {&record.a, &record.b}) {
        try {
            validate_and_repair(*v);
        } catch (const ValidationError& e) {
            fail(std::string(v == &record.a ? "variant A " : "variant B ") + e.what());
        }
    }
}

void validate_corpus(ExperimentCorpus& corpus) {
    if (corpus.records.empty()) throw ValidationError("empty corpus: at least one record is required");
    std::set<std::string> ids;
    const auto names = corpus.records.front().metric_names;
    for (auto& rec : corpus.records) {
        validate_record(rec);
        if (!ids.insert(rec.id).second) throw ValidationError("duplicate record id '" + rec.id + "'");
        if (rec.metric_names != names) {
            throw ValidationError("record '" + rec.id + "': metric_names differ from the first record");
        }
    }
    if (corpus.north_star_index >= names.size()) {
        throw ValidationError("north_star_index out of range");
    }
    if (corpus.input_indices.empty()) throw ValidationError("input_indices is empty");
    std::set<std::size_t> seen;
    for (std::size_t i : corpus.input_indices) {
        if (i >= names.size()) throw ValidationError("input index " + std::to_string(i) + " out of range");
        if (i == corpus.north_star_index) throw ValidationError("input_indices contains the north star");
        if (!seen.insert(i).second) throw ValidationError("duplicate input index " + std::to_string(i));
    }
}

ExperimentCorpus read_corpus(std::istream& in) {
    ExperimentCorpus corpus;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(line, e.what());
        }
        if (!have_header) {
            if (!obj.is_object() || !obj.contains("schema_version")) {
                throw ParseError(line, "first line must be the corpus header");
            }
            const int version = field<int>(obj, "schema_version", line);
            if (version != kCorpusSchemaVersion) {
                throw ParseError(line, "unsupported schema_version " + std::to_string(version));
            }
            corpus.north_star_index = field<std::size_t>(obj, "north_star_index", line);
            corpus.input_indices = field<std::vector<std::size_t>>(obj, "input_indices", line);
            have_header = true;
            continue;
        }
        corpus.records.push_back(parse_record(obj, line));
    }
    validate_corpus(corpus);
    return corpus;
}

ExperimentCorpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open corpus file '" + path.string() + "'");
    return read_corpus(in);
}

void write_corpus(const ExperimentCorpus& corpus, std::ostream& out) {
    ordered_json header;
    header["schema_version"] = kCorpusSchemaVersion;
    header["north_star_index"] = corpus.north_star_index;
    header["input_indices"] = corpus.input_indices;
    out << header.dump() << '\n';
    for (const auto& rec : corpus.records) {
        ordered_json obj;
        obj["id"] = rec.id;
        obj["label"] = to_string(rec.label);
        obj["treatments"] = rec.treatments;
        obj["n_a"] = rec.a.n_samples;
        obj["n_b"] = rec.b.n_samples;
        obj["metric_names"] = rec.metric_names;
        obj["mu_a"] = vector_json(rec.a.means);
        obj["mu_b"] = vector_json(rec.b.means);
        obj["cov_a"] = matrix_json(rec.a.cov);
        obj["cov_b"] = matrix_json(rec.b.cov);
        out << obj.dump() << '\n';
    }
}

void save_corpus(const ExperimentCorpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write corpus file '" + path.string() + "'");
    write_corpus(corpus, out);
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Partition partition(const ExperimentCorpus& corpus) {
    Partition p;
    for (const auto& rec : corpus.records) {
        switch (rec.label) {
            case OutcomeLabel::Known:
                p.known.push_back(&rec);
                break;
            case OutcomeLabel::Unknown:
                p.unknown.push_back(&rec);
                break;
            case OutcomeLabel::AA:
                p.aa.push_back(&rec);
                break;
        }
    }
    return p;
}

PreparedExperiment prepare(const ExperimentRecord& record, std::span<const std::size_t> indices) {
    PreparedExperiment exp;
    exp.id = record.id;
    exp.label = record.label;
    exp.treatments = record.treatments;
    exp.n_total = record.n_total();
    const std::size_t n = indices.size();
    exp.diff.resize(n);
    exp.pooled.resize(n * n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto i = static_cast<Eigen::Index>(indices[r]);
        if (i >= record.a.dimension()) throw InvalidArgument("prepare: metric index out of range");
        exp.diff[r] = record.a.means[i] - record.b.means[i];
        for (std::size_t c = 0; c < n; ++c) {
            const auto j = static_cast<Eigen::Index>(indices[c]);
            exp.pooled[r * n + c] = record.a.cov(i, j) + record.b.cov(i, j);
        }
    }
    return exp;
}

std::vector<PreparedExperiment> prepare_all(std::span<const ExperimentRecord* const> records,
                                            std::span<const std::size_t> indices) {
    std::vector<PreparedExperiment> out;
    out.reserve(records.size());
    for (const ExperimentRecord* rec : records) out.push_back(prepare(*rec, indices));
    return out;
}

double raw_z(const PreparedExperiment& exp, std::span<const double> w) {
    const std::size_t n = exp.dimension();
    if (w.size() != n) throw InvalidArgument("raw_z: weight dimension mismatch");
    thread_local std::vector<double> s_w;
    s_w.resize(n);
    const auto terms = kernels::project(exp.diff, exp.pooled, w, s_w);
    if (!(terms.quad > 0.0)) {
        throw DegenerateVariance("experiment '" + exp.id + "': quadratic form of the weights is not positive");
    }
    return terms.projection / std::sqrt(terms.quad);
}

double corrected_z(const ExperimentRecord& record, std::size_t metric, const CorrectionPolicy& policy) {
    return z_score_metric(record.a, record.b, metric) *
           correction_scale(record.treatments, record.n_total(), policy);
}

double corrected_z(const ExperimentRecord& record, std::span<const double> weights,
                   const CorrectionPolicy& policy) {
    return linear_metric_z(record.a, record.b, weights) *
           correction_scale(record.treatments, record.n_total(), policy);
}

double corrected_z(const PreparedExperiment& exp, std::span<const double> weights,
                   const CorrectionPolicy& policy) {
    return raw_z(exp, weights) * correction_scale(exp.treatments, exp.n_total, policy);
}

}  // namespace powerlearn
