#pragma once

// Experiment corpus: records, the JSON Lines persistence format, validation,
// label partitioning and per-experiment corrected z-scores.
//
// File layout (UTF-8, one JSON object per line):
//   line 1:  {"schema_version":1,"north_star_index":0,"input_indices":[1,2,...]}
//   line 2+: {"id":..,"label":"known"|"unknown"|"aa","treatments":T,"n_a":..,"n_b":..,
//             "metric_names":[..],"mu_a":[..],"mu_b":[..],"cov_a":[[..]],"cov_b":[[..]]}
// Doubles are written in shortest round-trip form, so a save/load cycle is
// bit-exact.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "powerlearn/stats.hpp"

namespace powerlearn {

inline constexpr int kCorpusSchemaVersion = 1;

enum class OutcomeLabel {
    Known,    ///< A is the vetted winner over B.
    Unknown,  ///< Something changed, direction not established.
    AA,       ///< Null holds by design.
};

std::string_view to_string(OutcomeLabel label) noexcept;
std::optional<OutcomeLabel> parse_label(std::string_view text) noexcept;

struct ExperimentRecord {
    std::string id;
    OutcomeLabel label = OutcomeLabel::Unknown;
    std::int64_t treatments = 1;
    std::vector<std::string> metric_names;
    VariantStats a;
    VariantStats b;

    std::size_t dimension() const noexcept { return metric_names.size(); }
    std::int64_t n_total() const noexcept { return a.n_samples + b.n_samples; }
};

struct ExperimentCorpus {
    std::vector<ExperimentRecord> records;
    std::size_t north_star_index = 0;
    std::vector<std::size_t> input_indices;

    const std::vector<std::string>& metric_names() const;
    std::vector<std::string> input_names() const;
};

/// Validates (and repairs covariances of) a single record in place.
void validate_record(ExperimentRecord& record);

/// Validates the whole corpus in place: every record, shared metric names,
/// unique ids, index ranges. Throws ValidationError.
void validate_corpus(ExperimentCorpus& corpus);

ExperimentCorpus read_corpus(std::istream& in);
ExperimentCorpus load_corpus(const std::filesystem::path& path);
void write_corpus(const ExperimentCorpus& corpus, std::ostream& out);
void save_corpus(const ExperimentCorpus& corpus, const std::filesystem::path& path);

struct Partition {
    std::vector<const ExperimentRecord*> known;
    std::vector<const ExperimentRecord*> unknown;
    std::vector<const ExperimentRecord*> aa;
};

/// Order-preserving split by label. Pointers refer into the corpus.
Partition partition(const ExperimentCorpus& corpus);

/// A record reduced to what scoring needs: the mean difference and pooled
/// covariance over a chosen subset of metrics.
struct PreparedExperiment {
    std::string id;
    OutcomeLabel label = OutcomeLabel::Unknown;
    std::int64_t treatments = 1;
    std::int64_t n_total = 0;
    std::vector<double> diff;    ///< mu_A - mu_B
    std::vector<double> pooled;  ///< S_A + S_B, row-major, dimension^2 entries

    std::size_t dimension() const noexcept { return diff.size(); }
};

PreparedExperiment prepare(const ExperimentRecord& record, std::span<const std::size_t> indices);
std::vector<PreparedExperiment> prepare_all(std::span<const ExperimentRecord* const> records,
                                            std::span<const std::size_t> indices);

/// Uncorrected z of the linear metric on a prepared experiment.
double raw_z(const PreparedExperiment& exp, std::span<const double> w);

/// Raw z (single metric or full-dimension weights), then Bonferroni with the
/// record's treatment count, then AVI with n_a + n_b, as enabled by the policy.
double corrected_z(const ExperimentRecord& record, std::size_t metric, const CorrectionPolicy& policy);
double corrected_z(const ExperimentRecord& record, std::span<const double> weights,
                   const CorrectionPolicy& policy);
double corrected_z(const PreparedExperiment& exp, std::span<const double> weights,
                   const CorrectionPolicy& policy);

}  // namespace powerlearn
