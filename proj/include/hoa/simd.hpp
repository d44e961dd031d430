#pragma once
// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64, an AVX2/FMA version picked at runtime. Reductions may differ in
// the last bits between the two because the summation order differs; the
// element-wise kernels are bit-identical.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace hoa::simd {

enum class Isa { kScalar, kAvx2 };

inline constexpr double kMaxCompanded = 1048575.0; // 2^20 - 1

struct KernelTable {
    Isa isa;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_squares)(const double* x, std::size_t n);
    double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = a * b (element-wise)
    void (*multiply)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = sign(x) * min(floor((|x| * inv_step)^(3/4) + offset), kMaxCompanded)
    void (*quantize_companded)(const double* x, double inv_step, double offset,
                               std::int32_t* out, std::size_t n);
    // Index of the row of `centroids` (count x dim, row-major) closest to v;
    // ties resolve to the smaller index.
    std::size_t (*nearest_row)(const double* v, const double* centroids, std::size_t dim,
                               std::size_t count, double* best_dist);
};

[[nodiscard]] bool isa_supported(Isa isa) noexcept;
[[nodiscard]] const KernelTable& table(Isa isa);
/// Table used by the library. Picks AVX2 when the CPU supports it unless the
/// HOA_SIMD environment variable is set to "scalar".
[[nodiscard]] const KernelTable& active() noexcept;
/// Overrides the runtime choice (tests, benchmarking).
void set_active(Isa isa);
[[nodiscard]] std::string_view isa_name(Isa isa) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline double sum_squares(std::span<const double> x) {
    return active().sum_squares(x.data(), x.size());
}
inline double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    return active().sum_sq_diff(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    active().multiply(a.data(), b.data(), out.data(), a.size());
}

namespace detail {
// Implemented in the per-ISA translation units.
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept;
} // namespace detail

} // namespace hoa::simd
