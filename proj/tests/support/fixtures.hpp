#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <json.hpp>
#include <random>
#include <string>
#include <vector>

#include "climsom/codec.hpp"
#include "climsom/ensemble.hpp"
#include "climsom/project.hpp"
#include "climsom/som.hpp"
#include "climsom/synthetic.hpp"

namespace climsom::fixture {

namespace fs = std::filesystem;

// Fresh, empty directory under the system temp dir.
inline fs::path scratch_dir(std::string const& tag) {
  static std::atomic<int> counter{0};
  auto const stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = fs::temp_directory_path() /
             ("climsom-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline SomGrid grid_of(int rows, int cols, std::size_t dim, std::vector<float> weights) {
  SomConfig c;
  c.rows = rows;
  c.cols = cols;
  return SomGrid(c, dim, std::move(weights));
}

inline SomGrid random_grid(int rows, int cols, std::size_t dim, std::uint64_t seed,
                           double lo = -2.0, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> w(static_cast<std::size_t>(rows * cols) * dim);
  for (auto& v : w) v = static_cast<float>(u(rng));
  return grid_of(rows, cols, dim, std::move(w));
}

inline SampleMatrix samples_of(std::size_t dim, std::vector<float> data) {
  SampleMatrix m;
  m.dim = dim;
  m.rows = data.size() / dim;
  m.data = std::move(data);
  m.refs.resize(m.rows);
  return m;
}

// Fully valid rows x cols raster at (lon0 + c, lat0 + r).
inline SpatialGrid toy_spatial(int rows, int cols, double lon0 = 0.0, double lat0 = 0.0) {
  std::vector<double> lats(rows), lons(cols);
  for (int r = 0; r < rows; ++r) lats[r] = lat0 + r;
  for (int c = 0; c < cols; ++c) lons[c] = lon0 + c;
  return SpatialGrid::from_mask(rows, cols, lats, lons,
                                std::vector<bool>(static_cast<std::size_t>(rows * cols), true));
}

inline nlohmann::json box_feature(std::string const& name, std::string const& state, double x0,
                                  double y0, double x1, double y1) {
  using nlohmann::json;
  json ring = json::array({json::array({x0, y0}), json::array({x1, y0}), json::array({x1, y1}),
                           json::array({x0, y1}), json::array({x0, y0})});
  json geometry = {{"type", "Polygon"}, {"coordinates", json::array({ring})}};
  json properties = {{"name", name}, {"state", state}};
  return {{"type", "Feature"}, {"properties", properties}, {"geometry", geometry}};
}

struct ToyCounty {
  std::string name;  // without the "County" suffix
  Box box;
};

// Six rectangular counties tiling a 5x5 raster at integer lon/lat 0..4.
inline std::vector<ToyCounty> toy_counties() {
  return {{"Los Angeles", {-0.5, -0.5, 1.5, 1.5}},    {"San Diego", {1.5, -0.5, 2.5, 1.5}},
          {"Orange", {-0.5, 1.5, 1.5, 4.5}},          {"Riverside", {1.5, 1.5, 2.5, 4.5}},
          {"San Bernardino", {2.5, -0.5, 3.5, 4.5}}, {"Ventura", {3.5, -0.5, 4.5, 4.5}}};
}

inline std::string toy_counties_geojson() {
  using nlohmann::json;
  json features = json::array();
  for (auto const& c : toy_counties()) {
    features.push_back(box_feature(c.name + " County", "CA", c.box.xmin, c.box.ymin, c.box.xmax,
                                   c.box.ymax));
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

// Small ensemble: 2 GCMs x {historical, ssp245}, 4x4 cells, 2 years.
inline SyntheticRecipe small_recipe() {
  SyntheticRecipe r;
  r.rows = 4;
  r.cols = 4;
  r.years = 2;
  r.archetypes = 3;
  r.noise = 0.1;
  for (std::string gcm : {"GCM-A", "GCM-B"}) {
    for (std::string ssp : {"historical", "ssp245"}) {
      SyntheticMember m;
      m.gcm = gcm;
      m.ssp = ssp;
      m.mix = ssp == "historical" ? std::vector<double>{1, 0.2, 0.2}
                                  : std::vector<double>{0.2, 0.2, 1};
      r.members.push_back(m);
    }
  }
  return r;
}

struct ProjectFixture {
  fs::path dir;
  fs::path project;
};

// Dataset + trained 5x5 SOM + saved project in a scratch directory.
inline ProjectFixture trained_project(std::string const& tag, std::uint64_t seed = 5) {
  ProjectFixture f;
  f.dir = scratch_dir(tag);
  auto const data = generate_synthetic_ensemble(small_recipe(), seed);
  save_ensemble(data, f.dir / "data");
  auto state = open_project(f.dir / "data");
  state.config.rows = 5;
  state.config.cols = 5;
  state.config.seed = seed;
  state.config.iterations = 2000;
  auto const samples = flatten_samples(*state.dataset, state.months);
  state.som = std::make_shared<SomGrid const>(train_som(samples, state.config));
  state.embedding = initial_embedding(*state.som);
  f.project = f.dir / "project.json";
  save_project(state, f.project);
  return f;
}

}  // namespace climsom::fixture
