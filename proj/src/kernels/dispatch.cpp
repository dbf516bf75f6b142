#include "tables.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace vmem::kernels {
namespace {

Isa detect() noexcept {
    if (const char* env = std::getenv("VMEM_ISA")) {
        const std::string_view requested(env);
        if (requested == "scalar") return Isa::scalar;
        if (requested == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
    }
    return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> selected{&table(detect())};
    return selected;
}

}  // namespace

bool isa_supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(VMEM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

std::string_view isa_name(Isa isa) noexcept {
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

const KernelTable& table(Isa isa) {
    if (!isa_supported(isa))
        throw std::runtime_error("kernel ISA not supported on this machine: " + std::string(isa_name(isa)));
#ifdef VMEM_HAVE_AVX2
    if (isa == Isa::avx2) return detail::avx2_table();
#endif
    return detail::scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

}  // namespace vmem::kernels
