#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace climsom {

// Classical MDS of an n x n row-major distance matrix. Returns n rows of
// `dims` coordinates (row-major). Negative eigenvalues contribute nothing.
// Each axis is oriented so its largest-magnitude coordinate is positive
// (first index on ties).
std::vector<double> classical_mds(std::span<double const> distances, std::size_t n,
                                  std::size_t dims);

}  // namespace climsom
