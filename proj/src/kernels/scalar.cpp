#include "tables.hpp"

namespace vmem::kernels::detail {
namespace {

void recursion_step(const RecursionStep& s) {
    for (std::size_t i = 0; i < s.n; ++i) {
        const double vs = s.omega[i] + s.alpha[i] * s.nu[i] + s.beta[i] * s.varsigma[i];
        const double common = s.theta[i] * s.xi;
        s.varsigma[i] = vs;
        s.ln_mu[i] = vs + common;
        s.nu[i] = s.x[i] - common;
    }
}

void centered_projection(std::size_t rows, std::size_t n, const double* x, std::size_t ld,
                         const double* center, const double* weights, double* out) {
    for (std::size_t t = 0; t < rows; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += weights[j] * (x[t + j * ld] - center[j]);
        out[t] = acc;
    }
}

void whitened_sq_norms(std::size_t rows, std::size_t n, const double* lower, const double* resid,
                       std::size_t ld, double* out) {
    for (std::size_t t = 0; t < rows; ++t) {
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
    double acc = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
        const double d = a[k] - b[k];
        acc += d * d;
    }
    return acc;
}

double sum_ratio(std::size_t len, const double* num, const double* den) {
    double acc = 0.0;
    for (std::size_t k = 0; k < len; ++k) acc += num[k] / den[k];
    return acc;
}

constexpr KernelTable kTable{Isa::scalar,       recursion_step, centered_projection,
                             whitened_sq_norms, sum_sq_diff,    sum_ratio};

}  // namespace

const KernelTable& scalar_table() noexcept { return kTable; }

}  // namespace vmem::kernels::detail
