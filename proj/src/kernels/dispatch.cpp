#include <atomic>
#include <cassert>

#include "powerlearn/errors.hpp"
#include "tables.hpp"

namespace powerlearn::kernels {
namespace {

bool cpu_supports(Backend b) noexcept {
    switch (b) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(POWERLEARN_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::Neon:
#if defined(POWERLEARN_HAVE_NEON)
            return true;  // Advanced SIMD is mandatory on AArch64.
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* lookup(Backend b) noexcept {
    if (!cpu_supports(b)) return nullptr;
    switch (b) {
        case Backend::Scalar:
            return &detail::kScalarTable;
#if defined(POWERLEARN_HAVE_AVX2)
        case Backend::Avx2:
            return &detail::kAvx2Table;
#endif
#if defined(POWERLEARN_HAVE_NEON)
        case Backend::Neon:
            return &detail::kNeonTable;
#endif
        default:
            return nullptr;
    }
}

const KernelTable* best_available() noexcept {
    for (Backend b : {Backend::Avx2, Backend::Neon}) {
        if (const KernelTable* t = lookup(b)) return t;
    }
    return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& active_slot() noexcept {
    static std::atomic<const KernelTable*> slot{best_available()};
    return slot;
}

}  // namespace

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::Scalar:
            return "scalar";
        case Backend::Avx2:
            return "avx2";
        case Backend::Neon:
            return "neon";
    }
    return "unknown";
}

const KernelTable& scalar_table() noexcept { return detail::kScalarTable; }

std::vector<Backend> available_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
        if (lookup(b)) out.push_back(b);
    }
    return out;
}

const KernelTable& table_for(Backend b) {
    const KernelTable* t = lookup(b);
    if (!t) throw InvalidArgument("kernel backend '" + std::string(backend_name(b)) + "' is not available");
    return *t;
}

const KernelTable& active() noexcept { return *active_slot().load(std::memory_order_acquire); }

void set_backend(Backend b) { active_slot().store(&table_for(b), std::memory_order_release); }

double dot(std::span<const double> x, std::span<const double> y) {
    assert(x.size() == y.size());
    return active().dot(x.data(), y.data(), x.size());
}

void symv(std::span<const double> s, std::span<const double> x, std::span<double> out) {
    assert(s.size() == x.size() * x.size() && out.size() == x.size());
    active().symv(s.data(), x.data(), out.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active().axpy(a, x.data(), y.data(), x.size());
}

QuadTerms project(std::span<const double> diff, std::span<const double> s,
                  std::span<const double> w, std::span<double> s_w) {
    assert(diff.size() == w.size() && s_w.size() == w.size() && s.size() == w.size() * w.size());
    return active().project(diff.data(), s.data(), w.data(), s_w.data(), w.size());
}

}  // namespace powerlearn::kernels
