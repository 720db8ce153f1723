// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <string_view>

#include "relrule/simd/kernels.hpp"

namespace relrule::simd {

const KernelTable& active() {
  static const KernelTable& chosen = [] () -> const KernelTable& {
    const char* forced = std::getenv("RELRULE_SIMD");
    if (forced && std::string_view(forced) == "scalar") return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return chosen;
}

}  // namespace relrule::simd
