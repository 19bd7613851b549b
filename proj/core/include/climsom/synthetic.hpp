#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "climsom/ensemble.hpp"

namespace climsom {

struct SyntheticMember {
  std::string gcm;
  std::string ssp;
  std::string variant = "r1i1p1f1";
  // Relative frequency of each archetype; normalized internally.
  std::vector<double> mix;
  // Constant added to every cell of every step.
  double shift = 0.0;
};

// Recipe for a test ensemble: every time step of a member is one archetype,
// drawn by the member's mixing weights, plus shift and Gaussian noise.
struct SyntheticRecipe {
  int rows = 6;
  int cols = 6;
  double lat0 = 32.0;
  double lon0 = -124.0;
  double step_deg = 1.0;
  int start_year = 1981;
  int years = 2;
  std::vector<int> months{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  // Number of random archetypes; ignored when `patterns` is non-empty.
  int archetypes = 2;
  std::vector<std::vector<float>> patterns;
  double archetype_scale = 1.0;
  double noise = 0.1;
  std::vector<SyntheticMember> members;
};

// Deterministic in (recipe, seed). Throws kInvalidArgument for zero
// archetypes or malformed mixing weights.
EnsembleDataset generate_synthetic_ensemble(SyntheticRecipe const& recipe, std::uint64_t seed);

// The archetype patterns the generator uses for (recipe, seed).
std::vector<std::vector<float>> synthetic_archetypes(SyntheticRecipe const& recipe,
                                                     std::uint64_t seed);

}  // namespace climsom
