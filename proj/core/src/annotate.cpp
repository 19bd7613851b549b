#include "climsom/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "climsom/error.hpp"

namespace climsom {

Annotation make_annotation(int id, std::string label, Ring polygon, int created_order) {
  auto ring = open_ring(polygon);
  auto distinct = ring;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    invalid("annotation polygon needs at least 3 distinct vertices");
  }
  for (auto const& p : ring) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) invalid("annotation vertex is not finite");
  }
  if (!is_simple_ring(ring)) {
    invalid("annotation polygon self-intersects");
  }
  return {id, std::move(label), std::move(ring), created_order};
}

std::vector<std::size_t> region_cells(ResolvedRegion const& region, SpatialGrid const& grid) {
  if (region.whole_domain) {
    std::vector<std::size_t> all(grid.num_cells());
    for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
    return all;
  }
  return cells_in_region(region.shape, grid);
}

char const* to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kThresholdAbove:
      return "threshold_above";
    case FilterKind::kThresholdBelow:
      return "threshold_below";
    case FilterKind::kBetween:
      return "between";
    case FilterKind::kRegionVsRegion:
      return "region_vs_region";
  }
  return "unknown";
}

FilterKind filter_kind_from_string(std::string const& text) {
  if (text == "threshold_above") return FilterKind::kThresholdAbove;
  if (text == "threshold_below") return FilterKind::kThresholdBelow;
  if (text == "between") return FilterKind::kBetween;
  if (text == "region_vs_region") return FilterKind::kRegionVsRegion;
  invalid("unsupported filter kind '" + text + "'");
}

void StructuredFilter::validate() const {
  if (kind == FilterKind::kBetween) {
    if (!y) invalid("between filter needs an upper bound");
    if (!(x < *y)) invalid("between filter needs x < y");
  }
  if (kind == FilterKind::kRegionVsRegion && !region_b) {
    invalid("region_vs_region filter needs a second region");
  }
  if (kind != FilterKind::kRegionVsRegion && !std::isfinite(x)) {
    invalid("filter threshold must be finite");
  }
}

FilterResult apply_filter(StructuredFilter const& filter, SomGrid const& grid,
                          SpatialGrid const& spatial, std::span<Vec2 const> positions) {
  filter.validate();
  if (grid.dim() != spatial.num_cells()) invalid("SOM dimension does not match the grid");
  if (positions.size() != grid.num_nodes()) invalid("embedding does not match the SOM");
  auto const cells_a = region_cells(filter.region_a, spatial);
  if (cells_a.empty()) invalid("region '" + filter.region_a.name + "' contains no cells");
  std::vector<std::size_t> cells_b;
  if (filter.kind == FilterKind::kRegionVsRegion) {
    cells_b = region_cells(*filter.region_b, spatial);
    if (cells_b.empty()) invalid("region '" + filter.region_b->name + "' contains no cells");
  }

  FilterResult out;
  for (std::size_t k = 0; k < grid.num_nodes(); ++k) {
    double const a = mean_over_cells(grid.weight(k), cells_a);
    bool pass = false;
    switch (filter.kind) {
      case FilterKind::kThresholdAbove:
        pass = a > filter.x;
        break;
      case FilterKind::kThresholdBelow:
        pass = a < filter.x;
        break;
      case FilterKind::kBetween:
        pass = a >= filter.x && a <= *filter.y;
        break;
      case FilterKind::kRegionVsRegion:
        pass = a > mean_over_cells(grid.weight(k), cells_b);
        break;
    }
    if (pass) out.nodes.push_back(k);
  }
  if (!out.nodes.empty()) {
    std::vector<Vec2> pts;
    for (auto k : out.nodes) pts.push_back(positions[k]);
    out.boundary = convex_hull(std::move(pts));
  }
  return out;
}

void Cutoffs::validate() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) invalid("cutoffs must be finite");
    if (i > 0 && !(values[i - 1] < values[i])) invalid("cutoffs must be strictly ascending");
  }
}

Bucket Cutoffs::classify(double mean) const {
  if (mean < values[0]) return kLow;
  if (mean < values[1]) return kModLow;
  if (mean <= values[2]) return kNeutral;
  if (mean <= values[3]) return kModHigh;
  return kHigh;
}

std::vector<std::size_t> farthest_point_sample(std::span<Vec2 const> positions,
                                               std::span<std::size_t const> candidates,
                                               std::size_t count) {
  std::vector<std::size_t> chosen;
  if (candidates.empty() || count == 0) return chosen;
  count = std::min(count, candidates.size());
  std::vector<double> nearest(candidates.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> taken(candidates.size(), false);
  std::size_t pick = 0;
  for (;;) {
    chosen.push_back(candidates[pick]);
    taken[pick] = true;
    if (chosen.size() == count) break;
    Vec2 const p = positions[candidates[pick]];
    double best = -1.0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (taken[i]) continue;
      nearest[i] = std::min(nearest[i], distance(positions[candidates[i]], p));
      if (nearest[i] > best) {
        best = nearest[i];
        next = i;
      }
    }
    pick = next;
  }
  return chosen;
}

BucketResult bucket_nodes(Ring const& region, SomGrid const& grid, SpatialGrid const& spatial,
                          std::span<Vec2 const> positions, CountyIndex const& counties,
                          Cutoffs const& cutoffs, std::size_t samples) {
  cutoffs.validate();
  if (positions.size() != grid.num_nodes()) invalid("embedding does not match the SOM");
  if (grid.dim() != spatial.num_cells()) invalid("SOM dimension does not match the grid");
  std::vector<std::size_t> inside;
  for (std::size_t k = 0; k < positions.size(); ++k) {
    if (point_in_ring(positions[k], region)) inside.push_back(k);
  }
  if (inside.empty()) invalid("region contains no SOM nodes");

  BucketResult out;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> county_cells;
  for (auto const& [key, shape] : counties.counties) {
    auto cells = cells_in_region(shape, spatial);
    if (cells.empty()) {
      out.uncovered_counties.push_back(key);
    } else {
      county_cells.emplace_back(key, std::move(cells));
    }
  }
  for (auto node : farthest_point_sample(positions, inside, samples)) {
    NodeSummaryBuckets b;
    b.node = node;
    for (auto const& [key, cells] : county_cells) {
      b.counties[cutoffs.classify(mean_over_cells(grid.weight(node), cells))].push_back(key);
    }
    out.nodes.push_back(std::move(b));
  }
  return out;
}

}  // namespace climsom
