#include "tables.hpp"

namespace powerlearn::kernels::detail {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void symv_scalar(const double* s, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = s + i * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
        out[i] = acc;
    }
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

QuadTerms project_scalar(const double* diff, const double* s, const double* w, double* s_w,
                         std::size_t n) {
    symv_scalar(s, w, s_w, n);
    return {dot_scalar(diff, w, n), dot_scalar(w, s_w, n)};
}

}  // namespace

const KernelTable kScalarTable{Backend::Scalar, dot_scalar, symv_scalar, axpy_scalar,
                               project_scalar};

}  // namespace powerlearn::kernels::detail
