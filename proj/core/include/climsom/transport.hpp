#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "climsom/geometry.hpp"

namespace climsom {

struct TransportPair {
  std::size_t source = 0;
  std::size_t target = 0;
  double mass = 0.0;
};

struct TransportPlan {
  std::vector<TransportPair> pairs;
  // Sum of mass x Euclidean distance.
  double cost = 0.0;
};

// Exact minimum-cost plan between two point sets with uniform weights
// 1/|a| and 1/|b|. Equal-size sets of distinct points are solved as an
// assignment problem; everything else goes through the network simplex on
// the coincident-point-aggregated problem. Among plans of minimal cost the
// one with the least total squared displacement is returned, so a pure
// translation is recovered as such.
TransportPlan optimal_transport(std::span<Vec2 const> a, std::span<Vec2 const> b);

// Distinct locations of a point set with multiplicities.
struct WeightedPoints {
  std::vector<Vec2> points;
  std::vector<std::int64_t> counts;
  // Original indices per distinct location, ascending.
  std::vector<std::vector<std::size_t>> members;

  std::int64_t total() const;
};

// Distinct locations in order of first appearance.
WeightedPoints aggregate_points(std::span<Vec2 const> points);

struct UnitFlow {
  std::size_t source = 0;
  std::size_t target = 0;
  std::int64_t units = 0;
};

// Transport between weighted point sets with uniform per-point mass: every
// point of `a` ships |b| units and every point of `b` receives |a| units.
// Ties between optimal plans are broken as in optimal_transport.
// Flows are sorted by (source, target) and reference distinct locations.
std::vector<UnitFlow> transport_weighted(WeightedPoints const& a, WeightedPoints const& b);

// Min-cost assignment of a square row-major cost matrix; result[row] = col.
std::vector<std::size_t> solve_assignment(std::span<double const> cost, std::size_t n);

// Min-cost transportation on a dense m x n row-major cost matrix with
// integral supplies and demands of equal total.
std::vector<UnitFlow> solve_transportation(std::span<double const> cost,
                                           std::span<std::int64_t const> supply,
                                           std::span<std::int64_t const> demand);

}  // namespace climsom
