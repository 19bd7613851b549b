#include "climsom/synthetic.hpp"

#include <numeric>
#include <random>

#include "climsom/error.hpp"

namespace climsom {

namespace {

std::size_t cell_count(SyntheticRecipe const& r) {
  return static_cast<std::size_t>(r.rows) * static_cast<std::size_t>(r.cols);
}

}  // namespace

std::vector<std::vector<float>> synthetic_archetypes(SyntheticRecipe const& recipe,
                                                     std::uint64_t seed) {
  if (!recipe.patterns.empty()) {
    for (auto const& p : recipe.patterns) {
      if (p.size() != cell_count(recipe)) {
        invalid("archetype pattern length does not match the grid");
      }
    }
    return recipe.patterns;
  }
  if (recipe.archetypes <= 0) {
    invalid("synthetic ensemble needs at least one archetype");
  }
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<float>> out(recipe.archetypes, std::vector<float>(cell_count(recipe)));
  for (auto& p : out) {
    for (auto& v : p) v = static_cast<float>(recipe.archetype_scale * normal(rng));
  }
  return out;
}

EnsembleDataset generate_synthetic_ensemble(SyntheticRecipe const& recipe, std::uint64_t seed) {
  if (recipe.rows <= 0 || recipe.cols <= 0 || recipe.years <= 0 || recipe.months.empty()) {
    invalid("synthetic recipe has an empty grid or time axis");
  }
  auto const patterns = synthetic_archetypes(recipe, seed);
  if (patterns.empty()) {
    invalid("synthetic ensemble needs at least one archetype");
  }

  EnsembleDataset ds;
  std::vector<double> lats(recipe.rows), lons(recipe.cols);
  for (int r = 0; r < recipe.rows; ++r) lats[r] = recipe.lat0 + r * recipe.step_deg;
  for (int c = 0; c < recipe.cols; ++c) lons[c] = recipe.lon0 + c * recipe.step_deg;
  ds.grid = SpatialGrid::from_mask(recipe.rows, recipe.cols, std::move(lats), std::move(lons),
                                   std::vector<bool>(cell_count(recipe), true));
  ds.time.start_year = recipe.start_year;
  for (int y = 0; y < recipe.years; ++y) {
    ds.time.months.insert(ds.time.months.end(), recipe.months.begin(), recipe.months.end());
  }

  auto const cells = cell_count(recipe);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto const& member : recipe.members) {
    if (member.mix.size() != patterns.size()) {
      invalid("mixing weights must have one entry per archetype");
    }
    double const total = std::accumulate(member.mix.begin(), member.mix.end(), 0.0);
    if (!(total > 0.0)) {
      invalid("mixing weights must have a positive sum");
    }
    ds.members.push_back({member.gcm, member.ssp, member.variant});
    std::vector<float> values;
    values.reserve(ds.time_len() * cells);
    for (std::size_t t = 0; t < ds.time_len(); ++t) {
      double u = unit(rng) * total;
      std::size_t k = 0;
      while (k + 1 < member.mix.size() && u >= member.mix[k]) {
        u -= member.mix[k];
        ++k;
      }
      for (std::size_t c = 0; c < cells; ++c) {
        values.push_back(static_cast<float>(patterns[k][c] + member.shift +
                                            recipe.noise * normal(rng)));
      }
    }
    ds.values.push_back(std::move(values));
  }
  ds.validate();
  return ds;
}

}  // namespace climsom
