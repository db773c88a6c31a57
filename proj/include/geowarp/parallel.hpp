#pragma once

#include <functional>

namespace geowarp {

enum class Execution { Serial, Parallel };

/// Runs fn(row) for every row in [0, rows). Rows must write disjoint outputs.
void for_each_row(int rows, Execution exec, const std::function<void(int)>& fn);

}  // namespace geowarp
