#pragma once

#include <algorithm>

#if defined(SIC_USE_PARALLEL)
#include <execution>
#endif

namespace sic::detail {

// Parallel sort for large arrays. Comparators must induce a total order on
// the stored values so the result is identical to the serial path.
template <typename It, typename Cmp>
void sort_large(It first, It last, Cmp cmp) {
#if defined(SIC_USE_PARALLEL)
    if (last - first > 50000) {
        std::sort(std::execution::par, first, last, cmp);
        return;
    }
#endif
    std::sort(first, last, cmp);
}

}  // namespace sic::detail
