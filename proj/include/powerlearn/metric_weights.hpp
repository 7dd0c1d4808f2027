#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace powerlearn {

/// Learnt linear metric: one weight per input metric, in input_indices order.
struct MetricWeights {
    std::vector<double> values;

    MetricWeights() = default;
    explicit MetricWeights(std::vector<double> v) : values(std::move(v)) {}

    std::size_t dimension() const noexcept { return values.size(); }
    std::span<const double> span() const noexcept { return values; }
    double squared_norm() const { return std::inner_product(values.begin(), values.end(), values.begin(), 0.0); }
    double norm() const { return std::sqrt(squared_norm()); }
    bool is_zero() const {
        for (double v : values) {
            if (v != 0.0) return false;
        }
        return true;
    }
};

/// Cosine similarity of two equally sized vectors; 0 if either is zero.
inline double cosine(std::span<const double> x, std::span<const double> y) {
    const double xy = std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
    const double xx = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
    const double yy = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
    if (xx == 0.0 || yy == 0.0) return 0.0;
    return xy / std::sqrt(xx * yy);
}

}  // namespace powerlearn
