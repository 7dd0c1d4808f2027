#include "powerlearn/synthgen.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "powerlearn/errors.hpp"

namespace powerlearn {
namespace {

// Independent stream per name, so a record does not depend on generation order.
std::mt19937_64 stream_for(std::uint64_t seed, const std::string& name) {
    std::vector<std::uint32_t> material{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (unsigned char c : name) material.push_back(c);
    std::seed_seq seq(material.begin(), material.end());
    return std::mt19937_64(seq);
}

std::string numbered(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%06zu", prefix, i);
    return buf;
}

struct Structure {
    std::vector<std::string> names;
    Eigen::VectorXd baseline;
    Eigen::MatrixXd cov;   // per-user covariance
    Eigen::MatrixXd chol;  // lower factor of cov
    Eigen::VectorXd sd;
};

Structure make_structure(const GeneratorConfig& cfg) {
    const auto d = static_cast<Eigen::Index>(cfg.n_metrics);
    auto rng = stream_for(cfg.seed, "#structure");
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.5, 1.5);

    Structure s;
    s.names.push_back("north_star");
    for (std::size_t j = 1; j < cfg.n_metrics; ++j) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "m%02zu", j);
        s.names.emplace_back(buf);
    }
    Eigen::MatrixXd loading(d, static_cast<Eigen::Index>(cfg.factor_rank));
    for (Eigen::Index i = 0; i < loading.size(); ++i) loading.data()[i] = 0.7 * normal(rng);
    Eigen::VectorXd diag(d);
    for (Eigen::Index j = 0; j < d; ++j) diag[j] = unif(rng);
    s.baseline.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) s.baseline[j] = 1.0 + 9.0 * (unif(rng) - 0.5);

    const double scale2 = cfg.noise_scale * cfg.noise_scale;
    s.cov = scale2 * (loading * loading.transpose());
    s.cov.diagonal() += scale2 * diag;
    s.chol = s.cov.llt().matrixL();
    s.sd = s.cov.diagonal().cwiseSqrt();
    return s;
}

VariantStats draw_variant(const Structure& s, const Eigen::VectorXd& effect, std::int64_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd g(s.baseline.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    VariantStats v;
    v.means = s.baseline + effect + inv_sqrt_n * (s.chol * g);
    v.cov = s.cov / static_cast<double>(n);
    v.n_samples = n;
    return v;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (n_metrics < 2) throw InvalidArgument("generator: n_metrics must be at least 2");
    if (n_known + n_unknown + n_aa == 0) throw InvalidArgument("generator: refusing to generate an empty corpus");
    if (users_min < 2 || users_max < users_min) throw InvalidArgument("generator: need 2 <= users_min <= users_max");
    if (!std::isfinite(north_star_sensitivity) || north_star_sensitivity <= 0.0) {
        throw InvalidArgument("generator: north_star_sensitivity must be a positive finite number");
    }
    if (proxy_sensitivities.size() != n_metrics - 1) {
        throw InvalidArgument("generator: proxy_sensitivities needs n_metrics - 1 entries");
    }
    for (double s : proxy_sensitivities) {
        if (!std::isfinite(s)) throw InvalidArgument("generator: proxy sensitivities must be finite");
    }
    if (adversarial) {
        const auto& a = *adversarial;
        if (a.metric == 0 || a.metric >= n_metrics) throw InvalidArgument("generator: adversarial metric out of range");
        if (!std::isfinite(a.base_sensitivity) || !std::isfinite(a.burst_sensitivity)) {
            throw InvalidArgument("generator: adversarial sensitivities must be finite");
        }
        if (!(a.burst_probability >= 0.0 && a.burst_probability <= 1.0)) {
            throw InvalidArgument("generator: burst_probability must lie in [0, 1]");
        }
    }
    if (!(noise_scale > 0.0) || !std::isfinite(noise_scale)) throw InvalidArgument("generator: noise_scale must be positive");
    if (factor_rank > n_metrics) throw InvalidArgument("generator: factor_rank must not exceed n_metrics");
    if (treatments_min < 1 || treatments_max < treatments_min) {
        throw InvalidArgument("generator: need 1 <= treatments_min <= treatments_max");
    }
    if (!(effect_min > 0.0) || effect_max < effect_min || !std::isfinite(effect_max)) {
        throw InvalidArgument("generator: need 0 < effect_min <= effect_max");
    }
    SignificanceLevel checked(label_alpha);
    (void)checked;
}

ExperimentCorpus generate_corpus(const GeneratorConfig& cfg) {
    cfg.validate();
    const Structure s = make_structure(cfg);
    const auto d = static_cast<Eigen::Index>(cfg.n_metrics);

    ExperimentCorpus corpus;
    corpus.north_star_index = 0;
    for (std::size_t j = 1; j < cfg.n_metrics; ++j) corpus.input_indices.push_back(j);

    CorrectionPolicy label_policy;
    label_policy.alpha = SignificanceLevel(cfg.label_alpha);
    const double threshold = -std_normal_ppf(cfg.label_alpha / 2.0);

    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < cfg.n_aa; ++i) {
        ExperimentRecord rec;
        rec.id = numbered("aa", i);
        rec.label = OutcomeLabel::AA;
        rec.treatments = 1;
        rec.metric_names = s.names;
        auto rng = stream_for(cfg.seed, rec.id);
        std::uniform_int_distribution<std::int64_t> users(cfg.users_min, cfg.users_max);
        const std::int64_t n = users(rng);  // same population size on both arms
        rec.a = draw_variant(s, zero, n, rng);
        rec.b = draw_variant(s, zero, n, rng);
        corpus.records.push_back(std::move(rec));
    }

    const std::size_t max_attempts =
        cfg.max_attempts ? cfg.max_attempts : 200 * (cfg.n_known + cfg.n_unknown) + 1000;
    std::size_t known = 0, unknown = 0;
    for (std::size_t attempt = 0; attempt < max_attempts && (known < cfg.n_known || unknown < cfg.n_unknown);
         ++attempt) {
        ExperimentRecord rec;
        rec.id = numbered("ab", attempt);
        rec.metric_names = s.names;
        auto rng = stream_for(cfg.seed, rec.id);
        std::uniform_real_distribution<double> magnitude(cfg.effect_min, cfg.effect_max);
        std::uniform_real_distribution<double> unit;
        std::uniform_int_distribution<std::int64_t> users(cfg.users_min, cfg.users_max);
        std::uniform_int_distribution<std::int64_t> arms(cfg.treatments_min, cfg.treatments_max);

        const double theta = (unit(rng) < 0.5 ? -1.0 : 1.0) * magnitude(rng);
        Eigen::VectorXd sensitivity(d);
        sensitivity[0] = cfg.north_star_sensitivity;
        for (Eigen::Index j = 1; j < d; ++j) sensitivity[j] = cfg.proxy_sensitivities[static_cast<std::size_t>(j - 1)];
        if (cfg.adversarial) {
            const auto& adv = *cfg.adversarial;
            const bool burst = unit(rng) < adv.burst_probability;
            sensitivity[static_cast<Eigen::Index>(adv.metric)] = burst ? adv.burst_sensitivity : adv.base_sensitivity;
        }
        const Eigen::VectorXd effect = theta * sensitivity.cwiseProduct(s.sd);
        rec.treatments = arms(rng);
        const std::int64_t n_a = users(rng);
        const std::int64_t n_b = users(rng);
        rec.a = draw_variant(s, effect, n_a, rng);
        rec.b = draw_variant(s, zero, n_b, rng);

        const double z_ns = corrected_z(rec, 0, label_policy);
        const bool significant = std::abs(z_ns) > threshold;
        if (significant && (z_ns > 0.0) == (theta > 0.0)) {
            if (known >= cfg.n_known) continue;
            rec.label = OutcomeLabel::Known;
            if (z_ns < 0.0) std::swap(rec.a, rec.b);
            ++known;
        } else {
            // Includes a North Star significant against the planted effect.
            if (unknown >= cfg.n_unknown) continue;
            rec.label = OutcomeLabel::Unknown;
            ++unknown;
        }
        corpus.records.push_back(std::move(rec));
    }
    if (known < cfg.n_known) {
        throw GenerationFailed("generator produced " + std::to_string(known) + " of " + std::to_string(cfg.n_known) +
                               " known records; increase north_star_sensitivity or max_attempts");
    }
    if (unknown < cfg.n_unknown) {
        throw GenerationFailed("generator produced " + std::to_string(unknown) + " of " +
                               std::to_string(cfg.n_unknown) +
                               " unknown records; decrease north_star_sensitivity or increase max_attempts");
    }
    std::sort(corpus.records.begin(), corpus.records.end(),
              [](const ExperimentRecord& x, const ExperimentRecord& y) { return x.id < y.id; });
    validate_corpus(corpus);
    return corpus;
}

}  // namespace powerlearn
