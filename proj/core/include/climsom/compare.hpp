#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "climsom/annotate.hpp"
#include "climsom/distribution.hpp"
#include "climsom/geometry.hpp"

namespace climsom {

struct VectorField {
  Box box;
  int n = 0;
  // Row-major [iy][ix]; unsupported cells hold (0, 0).
  std::vector<Vec2> vectors;
  std::vector<std::uint8_t> support;

  double cell_width() const { return box.width() / n; }
  double cell_height() const { return box.height() / n; }
  Vec2 cell_center(int ix, int iy) const {
    return {box.xmin + (ix + 0.5) * cell_width(), box.ymin + (iy + 0.5) * cell_height()};
  }
  std::size_t supported_cells() const;
};

struct FieldParams {
  int k = 20;  // bootstrap replicates
  int n = 16;  // cells per axis
  std::uint64_t seed = 0;
  // Defaults to the bounding box of both distributions.
  std::optional<Box> box;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Seed of bootstrap replicate r, a pure function of (seed, r).
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r);

// Bootstrap optimal-transport field from r1 to r2. Each replicate resamples
// both sides to their own size, transports, averages the displacement of
// every distinct source location, and spreads those samples over the grid
// by inverse-distance weighting within two cells. Cells are averaged over
// the replicates that support them.
VectorField bootstrap_vector_field(std::span<Vec2 const> r1, std::span<Vec2 const> r2,
                                   FieldParams const& params = {});

struct TransitionMatrix {
  // Annotation regions by (created_order, id), then "unannotated".
  std::vector<int> region_ids;  // -1 for unannotated
  std::vector<std::string> regions;
  // flows[source][target], summing to 1.
  std::vector<std::vector<double>> flows;
  std::vector<double> source_totals;
};

// Region index of a point: the containing annotation with the lowest
// created_order, or the unannotated index.
std::size_t region_of(Vec2 p, std::span<Annotation const> ordered);

TransitionMatrix transition_matrix(std::span<Vec2 const> r1, std::span<Vec2 const> r2,
                                   std::span<Annotation const> annotations,
                                   FieldParams const& params = {});

// Both KDEs evaluated on one grid spanning the union of the individual
// padded boxes.
std::pair<KdeResult, KdeResult> side_by_side(std::span<Vec2 const> r1, std::span<Vec2 const> r2,
                                             KdeParams const& params = {});

}  // namespace climsom
