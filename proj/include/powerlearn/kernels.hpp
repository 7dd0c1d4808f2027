#pragma once

// Dense inner-loop kernels shared by scoring, training and evaluation.
//
// Every kernel has a portable scalar reference implementation. SIMD variants
// (AVX2+FMA on x86-64, NEON on AArch64) are compiled in when the target
// supports them and selected at runtime from the CPU feature set. Variants
// differ from the scalar reference only by floating-point summation order.

#include <span>
#include <string_view>
#include <vector>

namespace powerlearn::kernels {

enum class Backend { Scalar, Avx2, Neon };

std::string_view backend_name(Backend b) noexcept;

/// Projection and quadratic form of a weight vector against one experiment.
struct QuadTerms {
    double projection;  ///< diff . w
    double quad;        ///< w' S w
};

struct KernelTable {
    Backend backend;
    double (*dot)(const double* x, const double* y, std::size_t n);
    /// out = S x, with S an n x n symmetric matrix in contiguous storage.
    void (*symv)(const double* s, const double* x, double* out, std::size_t n);
    /// y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    /// Fused: s_w = S w, returns {diff . w, w . s_w}.
    QuadTerms (*project)(const double* diff, const double* s, const double* w, double* s_w,
                         std::size_t n);
};

const KernelTable& scalar_table() noexcept;

/// Backends compiled into this binary and supported by the running CPU.
std::vector<Backend> available_backends();

/// Table for a specific backend; throws InvalidArgument if unavailable.
const KernelTable& table_for(Backend b);

/// Currently active table. Defaults to the widest available backend.
const KernelTable& active() noexcept;

/// Override the active backend (tests, benchmarking). Not thread-safe with
/// respect to concurrent kernel calls; call before starting work.
void set_backend(Backend b);

// Span conveniences over the active table.
double dot(std::span<const double> x, std::span<const double> y);
void symv(std::span<const double> s, std::span<const double> x, std::span<double> out);
void axpy(double a, std::span<const double> x, std::span<double> y);
QuadTerms project(std::span<const double> diff, std::span<const double> s,
                  std::span<const double> w, std::span<double> s_w);

}  // namespace powerlearn::kernels
