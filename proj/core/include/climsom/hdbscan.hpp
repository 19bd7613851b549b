#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace climsom {

struct HdbscanParams {
  int min_cluster_size = 3;
  // Neighbourhood size for core distances, counting the point itself.
  int min_samples = 2;
};

// Density clustering of an n x n row-major distance matrix: mutual
// reachability, minimum spanning tree, condensed tree, excess-of-mass
// selection (the root is never selected). Labels are dense from 0 in order
// of each cluster's lowest point index; -1 is noise.
std::vector<int> hdbscan(std::span<double const> distances, std::size_t n,
                         HdbscanParams const& params = {});

}  // namespace climsom
