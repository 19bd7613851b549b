#include "climsom/counties.hpp"

#include <json.hpp>

#include "climsom/codec.hpp"
#include "climsom/error.hpp"

namespace climsom {

using nlohmann::json;

MultiPolygon const& CountyIndex::at(std::string const& key) const {
  auto it = counties.find(key);
  if (it == counties.end()) {
    fail(ErrorKind::kNotFound, "unknown county " + key);
  }
  return it->second;
}

MultiPolygon CountyIndex::region(std::span<std::string const> keys) const {
  MultiPolygon out;
  for (auto const& key : keys) {
    auto const& parts = at(key);
    out.insert(out.end(), parts.begin(), parts.end());
  }
  return out;
}

namespace {

Ring parse_ring(json const& coords, std::string const& key) {
  Ring ring;
  for (auto const& c : coords) {
    ring.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  }
  if (ring.size() < 4) {
    fail(ErrorKind::kDataError, "ring with fewer than 4 vertices in " + key);
  }
  if (!(ring.front() == ring.back())) {
    fail(ErrorKind::kDataError, "unclosed ring in " + key);
  }
  return ring;
}

Polygon parse_polygon(json const& rings, std::string const& key) {
  Polygon poly;
  for (auto const& r : rings) {
    poly.rings.push_back(parse_ring(r, key));
  }
  if (poly.rings.empty()) {
    fail(ErrorKind::kDataError, "empty polygon in " + key);
  }
  return poly;
}

}  // namespace

CountyIndex parse_counties(std::string const& geojson) {
  CountyIndex index;
  try {
    auto const doc = json::parse(geojson);
    if (doc.at("type") != "FeatureCollection") {
      fail(ErrorKind::kDataError, "counties file is not a FeatureCollection");
    }
    for (auto const& feature : doc.at("features")) {
      auto const& props = feature.at("properties");
      auto const key =
          props.at("name").get<std::string>() + "-" + props.at("state").get<std::string>();
      if (index.contains(key)) {
        fail(ErrorKind::kDataError, "duplicate county key " + key);
      }
      auto const& geom = feature.at("geometry");
      auto const type = geom.at("type").get<std::string>();
      MultiPolygon shape;
      if (type == "Polygon") {
        shape.push_back(parse_polygon(geom.at("coordinates"), key));
      } else if (type == "MultiPolygon") {
        for (auto const& p : geom.at("coordinates")) {
          shape.push_back(parse_polygon(p, key));
        }
      } else {
        fail(ErrorKind::kDataError, "unsupported geometry " + type + " in " + key);
      }
      index.counties.emplace(key, std::move(shape));
    }
  } catch (json::exception const& e) {
    fail(ErrorKind::kDataError, std::string("malformed GeoJSON: ") + e.what());
  }
  return index;
}

CountyIndex load_counties(std::filesystem::path const& path) {
  return parse_counties(codec::read_file(path));
}

std::vector<std::size_t> cells_in_region(MultiPolygon const& region, SpatialGrid const& grid) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < grid.num_cells(); ++c) {
    if (point_in_multipolygon(grid.lonlat(c), region)) {
      out.push_back(c);
    }
  }
  return out;
}

double mean_over_cells(std::span<float const> pattern, std::span<std::size_t const> cells) {
  if (cells.empty()) {
    invalid("region contains no cells");
  }
  double s = 0.0;
  for (auto c : cells) s += pattern[c];
  return s / static_cast<double>(cells.size());
}

double region_mean(std::span<float const> pattern, MultiPolygon const& region,
                   SpatialGrid const& grid) {
  if (pattern.size() != grid.num_cells()) {
    invalid("pattern length does not match the grid");
  }
  auto const cells = cells_in_region(region, grid);
  return mean_over_cells(pattern, cells);
}

}  // namespace climsom
