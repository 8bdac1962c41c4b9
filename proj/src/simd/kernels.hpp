#pragma once

#include "mifprop/simd.hpp"

namespace mifprop::simd::detail {

extern const KernelTable kScalarTable;
#if defined(MIFPROP_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

}  // namespace mifprop::simd::detail
