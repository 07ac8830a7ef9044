#pragma once

#include "lunet/kernels.hpp"

namespace lunet::kernels::detail {

extern const KernelTable kScalarTable;
#if defined(LUNET_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace lunet::kernels::detail
