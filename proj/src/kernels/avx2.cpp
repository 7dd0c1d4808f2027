#include <immintrin.h>

#include "tables.hpp"

namespace powerlearn::kernels::detail {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        i += 4;
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

// S is symmetric, so column j equals row j: accumulate out += x[j] * S[j, :].
void symv_avx2(const double* s, const double* x, double* out, std::size_t n) {
    std::size_t vec_end = n - n % 4;
    for (std::size_t i = 0; i < vec_end; i += 4) _mm256_storeu_pd(out + i, _mm256_setzero_pd());
    for (std::size_t i = vec_end; i < n; ++i) out[i] = 0.0;

    for (std::size_t j = 0; j < n; ++j) {
        const double* col = s + j * n;
        const __m256d xj = _mm256_set1_pd(x[j]);
        std::size_t i = 0;
        for (; i < vec_end; i += 4) {
            __m256d o = _mm256_loadu_pd(out + i);
            _mm256_storeu_pd(out + i, _mm256_fmadd_pd(xj, _mm256_loadu_pd(col + i), o));
        }
        for (; i < n; ++i) out[i] += x[j] * col[i];
    }
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

QuadTerms project_avx2(const double* diff, const double* s, const double* w, double* s_w,
                       std::size_t n) {
    symv_avx2(s, w, s_w, n);
    return {dot_avx2(diff, w, n), dot_avx2(w, s_w, n)};
}

}  // namespace

const KernelTable kAvx2Table{Backend::Avx2, dot_avx2, symv_avx2, axpy_avx2, project_avx2};

}  // namespace powerlearn::kernels::detail
