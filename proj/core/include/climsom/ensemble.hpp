#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "climsom/geometry.hpp"

namespace climsom {

struct MemberId {
  std::string gcm;
  std::string ssp;
  std::string variant;

  // "gcm:ssp:variant", the identifier used by the CLI and the HTTP API.
  std::string key() const;
  friend bool operator==(MemberId const&, MemberId const&) = default;
};

// Valid cells of the source raster. Masked raster positions have no cell.
struct SpatialGrid {
  int rows = 0;
  int cols = 0;
  std::vector<double> lats;  // one per raster row
  std::vector<double> lons;  // one per raster column
  std::vector<int> cell_to_raster;
  std::vector<int> raster_to_cell;  // -1 for masked positions

  static SpatialGrid from_mask(int rows, int cols, std::vector<double> lats,
                               std::vector<double> lons, std::vector<bool> const& valid);

  std::size_t num_cells() const { return cell_to_raster.size(); }
  double lat(std::size_t cell) const { return lats[cell_to_raster[cell] / cols]; }
  double lon(std::size_t cell) const { return lons[cell_to_raster[cell] % cols]; }
  // Cell centre as (x = lon, y = lat).
  Vec2 lonlat(std::size_t cell) const { return {lon(cell), lat(cell)}; }
  std::vector<bool> valid_mask() const;
};

// One calendar month (1-12) per stored time step. The year advances each
// time the month index fails to increase.
struct TimeAxis {
  int start_year = 0;
  std::vector<int> months;

  std::size_t size() const { return months.size(); }
  std::vector<int> years() const;
};

struct EnsembleDataset {
  std::vector<MemberId> members;
  SpatialGrid grid;
  TimeAxis time;
  // values[member] is laid out [time][cell].
  std::vector<std::vector<float>> values;
  bool normalized = false;

  std::size_t time_len() const { return time.size(); }
  std::size_t num_cells() const { return grid.num_cells(); }
  std::span<float const> step(std::size_t member, std::size_t t) const {
    return {values[member].data() + t * num_cells(), num_cells()};
  }
  // Index of a member by key; throws kNotFound.
  std::size_t member_index(std::string const& key) const;
  // Throws kDataError when an invariant is broken.
  void validate() const;
};

class MonthFilter {
 public:
  MonthFilter() = default;
  static MonthFilter all();
  static MonthFilter of(std::span<int const> months);
  // Accepts "all", comma lists ("1,2,12") and ranges that may wrap the year
  // boundary ("10-5" is October through May).
  static MonthFilter parse(std::string const& text);

  bool contains(int month) const { return month >= 1 && month <= 12 && bits_[month]; }
  bool empty() const;
  std::vector<int> months() const;
  // Canonical comma-separated form, ascending.
  std::string to_string() const;

  friend bool operator==(MonthFilter const&, MonthFilter const&) = default;

 private:
  std::array<bool, 13> bits_{};
};

struct SampleRef {
  std::int32_t member = 0;
  std::int32_t time_index = 0;
  std::int32_t year = 0;
  std::int32_t month = 0;
};

struct SampleMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<SampleRef> refs;

  std::span<float const> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
};

EnsembleDataset load_ensemble(std::filesystem::path const& dir);
void save_ensemble(EnsembleDataset const& dataset, std::filesystem::path const& dir);

// Population standard deviation per calendar month pooled over members,
// years and cells. Entry 0 is unused; months with no data report 0.
std::array<double, 13> pooled_month_std(EnsembleDataset const& dataset);

EnsembleDataset normalize_per_month(EnsembleDataset dataset);

SampleMatrix flatten_samples(EnsembleDataset const& dataset, MonthFilter const& months);

// Mean over all cells, used as a run's spatial-mean anomaly.
double spatial_mean(std::span<float const> values);

}  // namespace climsom
