#include "geowarp/parallel.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

namespace geowarp {

void for_each_row(int rows, Execution exec, const std::function<void(int)>& fn) {
    if (exec == Execution::Serial) {
        for (int r = 0; r < rows; ++r) fn(r);
        return;
    }
    tbb::parallel_for(tbb::blocked_range<int>(0, rows), [&](const tbb::blocked_range<int>& range) {
        for (int r = range.begin(); r != range.end(); ++r) fn(r);
    });
}

}  // namespace geowarp
