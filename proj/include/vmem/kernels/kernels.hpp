#pragma once

// Data-parallel inner loops of the filter, the likelihood and the loss
// functions. Every kernel has a scalar reference implementation and, where
// the target supports it, an AVX2 variant. The variant is chosen once at
// runtime (CPU feature probe, overridable with VMEM_ISA=scalar|avx2).
//
// Elementwise kernels and the per-row kernels (projection, whitened norms)
// keep the scalar accumulation order per output element, so all tables agree
// bit-for-bit on them. Only the full reductions (sum_sq_diff, sum_ratio)
// reassociate and agree to rounding.

#include <cstddef>
#include <string_view>

namespace vmem::kernels {

enum class Isa { scalar, avx2 };

/// One step of the idiosyncratic recursion across n assets, in place:
///   varsigma <- omega + alpha * nu + beta * varsigma
///   ln_mu    <- varsigma + theta * xi
///   nu       <- x - theta * xi
struct RecursionStep {
    std::size_t n;
    const double* omega;
    const double* alpha;
    const double* beta;
    const double* theta;
    double xi;
    const double* x;
    double* nu;
    double* varsigma;
    double* ln_mu;
};

struct KernelTable {
    Isa isa;

    void (*recursion_step)(const RecursionStep& step);

    /// out[t] = sum_j weights[j] * (x[t + j*ld] - center[j]) for t < rows.
    void (*centered_projection)(std::size_t rows, std::size_t n, const double* x, std::size_t ld,
                                const double* center, const double* weights, double* out);

    /// out[t] = || W r_t ||^2 where W is lower triangular (n x n, row-major)
    /// and r_t is row t of the column-major residual block (leading dim ld).
    void (*whitened_sq_norms)(std::size_t rows, std::size_t n, const double* lower,
                              const double* resid, std::size_t ld, double* out);

    double (*sum_sq_diff)(std::size_t len, const double* a, const double* b);
    double (*sum_ratio)(std::size_t len, const double* num, const double* den);
};

bool isa_supported(Isa isa) noexcept;
std::string_view isa_name(Isa isa) noexcept;

/// Table for a specific ISA; throws if it is not supported on this machine.
const KernelTable& table(Isa isa);

/// Currently selected table.
const KernelTable& active();

/// Overrides the runtime selection (tests, benchmarking).
void select(Isa isa);

}  // namespace vmem::kernels
