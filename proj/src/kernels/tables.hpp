#pragma once

#include "powerlearn/kernels.hpp"

namespace powerlearn::kernels::detail {

extern const KernelTable kScalarTable;
#if defined(POWERLEARN_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(POWERLEARN_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif

}  // namespace powerlearn::kernels::detail
