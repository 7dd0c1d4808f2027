#include <arm_neon.h>

#include "tables.hpp"

namespace powerlearn::kernels::detail {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void symv_neon(const double* s, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double* col = s + j * n;
        const float64x2_t xj = vdupq_n_f64(x[j]);
        std::size_t i = 0;
        for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vfmaq_f64(vld1q_f64(out + i), xj, vld1q_f64(col + i)));
        for (; i < n; ++i) out[i] += x[j] * col[i];
    }
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), av, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

QuadTerms project_neon(const double* diff, const double* s, const double* w, double* s_w,
                       std::size_t n) {
    symv_neon(s, w, s_w, n);
    return {dot_neon(diff, w, n), dot_neon(w, s_w, n)};
}

}  // namespace

const KernelTable kNeonTable{Backend::Neon, dot_neon, symv_neon, axpy_neon, project_neon};

}  // namespace powerlearn::kernels::detail
