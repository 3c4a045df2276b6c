#pragma once

#include "dmoe/kernels.hpp"

namespace dmoe::kernels::detail {

extern const KernelTable kScalarTable;
#if defined(DMOE_HAVE_AVX2_KERNELS)
extern const KernelTable kAvx2Table;
#endif

}  // namespace dmoe::kernels::detail
