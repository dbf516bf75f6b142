#pragma once

#include "vmem/kernels/kernels.hpp"

namespace vmem::kernels::detail {

const KernelTable& scalar_table() noexcept;
#ifdef VMEM_HAVE_AVX2
const KernelTable& avx2_table() noexcept;
#endif

}  // namespace vmem::kernels::detail
