#include "tables.hpp"

#include <immintrin.h>

// Compiled with -mavx2 only (no -mfma): products and sums are rounded
// separately, matching the scalar table.

namespace vmem::kernels::detail {
namespace {

constexpr std::size_t kLanes = 4;

inline double horizontal_sum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    const __m128d swapped = _mm_unpackhi_pd(pair, pair);
    return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

void recursion_step(const RecursionStep& s) {
    const __m256d xi = _mm256_set1_pd(s.xi);
    std::size_t i = 0;
    for (; i + kLanes <= s.n; i += kLanes) {
        const __m256d omega = _mm256_loadu_pd(s.omega + i);
        const __m256d a_nu = _mm256_mul_pd(_mm256_loadu_pd(s.alpha + i), _mm256_loadu_pd(s.nu + i));
        const __m256d b_vs = _mm256_mul_pd(_mm256_loadu_pd(s.beta + i), _mm256_loadu_pd(s.varsigma + i));
        const __m256d vs = _mm256_add_pd(_mm256_add_pd(omega, a_nu), b_vs);
        const __m256d common = _mm256_mul_pd(_mm256_loadu_pd(s.theta + i), xi);
        _mm256_storeu_pd(s.varsigma + i, vs);
        _mm256_storeu_pd(s.ln_mu + i, _mm256_add_pd(vs, common));
        _mm256_storeu_pd(s.nu + i, _mm256_sub_pd(_mm256_loadu_pd(s.x + i), common));
    }
    for (; i < s.n; ++i) {
        const double vs = s.omega[i] + s.alpha[i] * s.nu[i] + s.beta[i] * s.varsigma[i];
        const double common = s.theta[i] * s.xi;
        s.varsigma[i] = vs;
        s.ln_mu[i] = vs + common;
        s.nu[i] = s.x[i] - common;
    }
}

void centered_projection(std::size_t rows, std::size_t n, const double* x, std::size_t ld,
                         const double* center, const double* weights, double* out) {
    std::size_t t = 0;
    for (; t + kLanes <= rows; t += kLanes) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t j = 0; j < n; ++j) {
            const __m256d centered =
                _mm256_sub_pd(_mm256_loadu_pd(x + t + j * ld), _mm256_set1_pd(center[j]));
            acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(weights[j]), centered));
        }
        _mm256_storeu_pd(out + t, acc);
    }
    for (; t < rows; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += weights[j] * (x[t + j * ld] - center[j]);
        out[t] = acc;
    }
}

void whitened_sq_norms(std::size_t rows, std::size_t n, const double* lower, const double* resid,
                       std::size_t ld, double* out) {
    std::size_t t = 0;
    for (; t + kLanes <= rows; t += kLanes) {
        __m256d q = _mm256_setzero_pd();
        for (std::size_t i = 0; i < n; ++i) {
            __m256d z = _mm256_setzero_pd();
            for (std::size_t j = 0; j <= i; ++j) {
                z = _mm256_add_pd(z, _mm256_mul_pd(_mm256_set1_pd(lower[i * n + j]),
                                                   _mm256_loadu_pd(resid + t + j * ld)));
            }
            q = _mm256_add_pd(q, _mm256_mul_pd(z, z));
        }
        _mm256_storeu_pd(out + t, q);
    }
    for (; t < rows; ++t) {
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = 0.0;
            for (std::size_t j = 0; j <= i; ++j) z += lower[i * n + j] * resid[t + j * ld];
            q += z * z;
        }
        out[t] = q;
    }
}

double sum_sq_diff(std::size_t len, const double* a, const double* b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + kLanes <= len; k += kLanes) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double total = horizontal_sum(acc);
    for (; k < len; ++k) {
        const double d = a[k] - b[k];
        total += d * d;
    }
    return total;
}

double sum_ratio(std::size_t len, const double* num, const double* den) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t k = 0;
    for (; k + kLanes <= len; k += kLanes)
        acc = _mm256_add_pd(acc, _mm256_div_pd(_mm256_loadu_pd(num + k), _mm256_loadu_pd(den + k)));
    double total = horizontal_sum(acc);
    for (; k < len; ++k) total += num[k] / den[k];
    return total;
}

constexpr KernelTable kTable{Isa::avx2,         recursion_step, centered_projection,
                             whitened_sq_norms, sum_sq_diff,    sum_ratio};

}  // namespace

const KernelTable& avx2_table() noexcept { return kTable; }

}  // namespace vmem::kernels::detail
