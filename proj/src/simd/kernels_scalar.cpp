#include "hoa/simd.hpp"

#include <cmath>
#include <limits>

namespace hoa::simd::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void multiply_scalar(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

// x^(3/4) is evaluated as sqrt(x * sqrt(x)) so that the vector version, which
// has no pow instruction, produces the same bits.
void quantize_companded_scalar(const double* x, double inv_step, double offset,
                               std::int32_t* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(x[i]) * inv_step;
        const double c = std::sqrt(a * std::sqrt(a));
        const double q = std::min(std::floor(c + offset), kMaxCompanded);
        const auto m = static_cast<std::int32_t>(q);
        out[i] = x[i] < 0.0 ? -m : m;
    }
}

std::size_t nearest_row_scalar(const double* v, const double* centroids, std::size_t dim,
                               std::size_t count, double* best_dist) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < count; ++c) {
        const double d = sum_sq_diff_scalar(v, centroids + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_dist) *best_dist = best_d;
    return best;
}

constexpr KernelTable kScalar{
    Isa::kScalar,
    &dot_scalar,
    &sum_squares_scalar,
    &sum_sq_diff_scalar,
    &axpy_scalar,
    &multiply_scalar,
    &quantize_companded_scalar,
    &nearest_row_scalar,
};

} // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

} // namespace hoa::simd::detail
