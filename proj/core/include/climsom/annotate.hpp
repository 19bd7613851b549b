#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "climsom/counties.hpp"
#include "climsom/ensemble.hpp"
#include "climsom/geometry.hpp"
#include "climsom/som.hpp"

namespace climsom {

// A labeled region of the node space.
struct Annotation {
  int id = 0;
  std::string label;
  Ring polygon;  // open ring in embedding coordinates
  int created_order = 0;

  friend bool operator==(Annotation const&, Annotation const&) = default;
};

// Normalizes the ring (drops a closing vertex) and throws kInvalidArgument
// unless it has >= 3 distinct vertices and does not self-intersect.
Annotation make_annotation(int id, std::string label, Ring polygon, int created_order);

// A geographic region resolved to grid cells. `whole_domain` selects every
// valid cell regardless of the shape.
struct ResolvedRegion {
  std::string name;
  std::vector<std::string> counties;
  std::vector<std::string> dropped;  // names the LLM returned that are not in the index
  MultiPolygon shape;
  bool whole_domain = false;
};

std::vector<std::size_t> region_cells(ResolvedRegion const& region, SpatialGrid const& grid);

enum class FilterKind { kThresholdAbove, kThresholdBelow, kBetween, kRegionVsRegion };

char const* to_string(FilterKind kind);
FilterKind filter_kind_from_string(std::string const& text);

struct StructuredFilter {
  FilterKind kind = FilterKind::kThresholdAbove;
  ResolvedRegion region_a;
  std::optional<ResolvedRegion> region_b;
  double x = 0.0;
  std::optional<double> y;

  void validate() const;
};

struct FilterResult {
  std::vector<std::size_t> nodes;
  // Convex hull of the passing nodes' positions; empty when no node passes.
  Ring boundary;
};

// Node passes iff its region mean over region_a satisfies the predicate:
// above (> x), below (< x), between (x <= mean <= y), or
// mean(region_a) > mean(region_b). Predicates read weights only.
FilterResult apply_filter(StructuredFilter const& filter, SomGrid const& grid,
                          SpatialGrid const& spatial, std::span<Vec2 const> positions);

enum Bucket { kLow = 0, kModLow = 1, kNeutral = 2, kModHigh = 3, kHigh = 4 };
inline constexpr std::array<char const*, 5> kBucketKeys{"low", "mod_low", "neutral", "mod_high",
                                                         "high"};

struct Cutoffs {
  std::array<double, 4> values{-1.5, -0.5, 0.5, 1.5};

  void validate() const;
  // low < c0 <= mod_low < c1 <= neutral <= c2 < mod_high <= c3 < high
  Bucket classify(double mean) const;
};

struct NodeSummaryBuckets {
  std::size_t node = 0;
  std::array<std::vector<std::string>, 5> counties;
};

// Deterministic farthest-point sampling of `count` entries of `candidates`,
// starting from the first candidate; ties go to the earlier candidate.
std::vector<std::size_t> farthest_point_sample(std::span<Vec2 const> positions,
                                               std::span<std::size_t const> candidates,
                                               std::size_t count);

struct BucketResult {
  std::vector<NodeSummaryBuckets> nodes;
  // Counties with no grid cell inside; they cannot be bucketed.
  std::vector<std::string> uncovered_counties;
};

BucketResult bucket_nodes(Ring const& region, SomGrid const& grid, SpatialGrid const& spatial,
                          std::span<Vec2 const> positions, CountyIndex const& counties,
                          Cutoffs const& cutoffs, std::size_t samples = 9);

}  // namespace climsom
