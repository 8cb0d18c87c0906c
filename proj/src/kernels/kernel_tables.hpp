// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "sdpo/kernels.hpp"

namespace sdpo::kernels::detail {

extern const KernelTable scalar_table;

#if defined(SDPO_HAVE_AVX2_KERNELS)
extern const KernelTable avx2_table;
#endif

#if defined(SDPO_HAVE_NEON_KERNELS)
extern const KernelTable neon_table;
#endif

}  // namespace sdpo::kernels::detail
