#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "climsom/ensemble.hpp"
#include "climsom/geometry.hpp"

namespace climsom {

// County boundaries in lon/lat degrees keyed "Name-State".
struct CountyIndex {
  std::map<std::string, MultiPolygon> counties;

  std::size_t size() const { return counties.size(); }
  bool contains(std::string const& key) const { return counties.count(key) > 0; }
  MultiPolygon const& at(std::string const& key) const;
  // Union (as a multipolygon) of the listed counties.
  MultiPolygon region(std::span<std::string const> keys) const;
};

CountyIndex load_counties(std::filesystem::path const& path);
CountyIndex parse_counties(std::string const& geojson);

// Cells whose centre lies inside the region (even-odd rule, boundary inside).
std::vector<std::size_t> cells_in_region(MultiPolygon const& region, SpatialGrid const& grid);

double mean_over_cells(std::span<float const> pattern, std::span<std::size_t const> cells);

// Throws kInvalidArgument when the region contains no cells.
double region_mean(std::span<float const> pattern, MultiPolygon const& region,
                   SpatialGrid const& grid);

}  // namespace climsom
