#include "hoa/simd.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace hoa::simd::detail {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        acc0 = _mm256_fmadd_pd(d0, d0, acc0);
        acc1 = _mm256_fmadd_pd(d1, d1, acc1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc0 = _mm256_fmadd_pd(d, d, acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void multiply_avx2(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void quantize_companded_avx2(const double* x, double inv_step, double offset,
                             std::int32_t* out, std::size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    const __m256d vstep = _mm256_set1_pd(inv_step);
    const __m256d voff = _mm256_set1_pd(offset);
    const __m256d vmax = _mm256_set1_pd(kMaxCompanded);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d a = _mm256_mul_pd(_mm256_andnot_pd(sign_mask, v), vstep);
        const __m256d c = _mm256_sqrt_pd(_mm256_mul_pd(a, _mm256_sqrt_pd(a)));
        const __m256d q = _mm256_min_pd(_mm256_floor_pd(_mm256_add_pd(c, voff)), vmax);
        // Restore the sign of the input on the magnitude (zero stays +0).
        const __m256d neg = _mm256_cmp_pd(v, _mm256_setzero_pd(), _CMP_LT_OQ);
        const __m256d signed_q = _mm256_blendv_pd(q, _mm256_sub_pd(_mm256_setzero_pd(), q), neg);
        _mm_storeu_si128(reinterpret_cast<__m128i*>(out + i), _mm256_cvttpd_epi32(signed_q));
    }
    for (; i < n; ++i) {
        const double a = std::fabs(x[i]) * inv_step;
        const double c = std::sqrt(a * std::sqrt(a));
        const auto m = static_cast<std::int32_t>(std::min(std::floor(c + offset), kMaxCompanded));
        out[i] = x[i] < 0.0 ? -m : m;
    }
}

std::size_t nearest_row_avx2(const double* v, const double* centroids, std::size_t dim,
                             std::size_t count, double* best_dist) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < count; ++c) {
        const double d = sum_sq_diff_avx2(v, centroids + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_dist) *best_dist = best_d;
    return best;
}

constexpr KernelTable kAvx2{
    Isa::kAvx2,
    &dot_avx2,
    &sum_squares_avx2,
    &sum_sq_diff_avx2,
    &axpy_avx2,
    &multiply_avx2,
    &quantize_companded_avx2,
    &nearest_row_avx2,
};

} // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2; }

} // namespace hoa::simd::detail
