#pragma once

#include <cstdint>
#include <vector>

namespace mscrn {

using IntVector = std::vector<std::int64_t>;
using IntMatrix = std::vector<std::vector<int>>;

/// Integer basis of {x in Z^m : x^T A = 0} for an m x n matrix A.
///
/// The rational null space is found by exact elimination, scaled to
/// integers, LLL-reduced and then normalized: every vector primitive with a
/// positive leading entry, the list sorted lexicographically.
std::vector<IntVector> integer_left_null_space(const IntMatrix& a, std::size_t rows);

/// LLL reduction (delta = 3/4) with exact rational arithmetic.
std::vector<IntVector> lll_reduce(std::vector<IntVector> basis);

}  // namespace mscrn
