#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "climsom/annotate.hpp"
#include "climsom/ensemble.hpp"
#include "climsom/geometry.hpp"
#include "climsom/som.hpp"

namespace climsom {

struct PointProvenance {
  int member = 0;
  int year = 0;
  int month = 0;
};

struct RunSelector {
  std::vector<std::string> members;  // member keys
  MonthFilter months;
};

// Embedding positions of the BMUs of every selected time step.
struct RunDistribution {
  std::vector<Vec2> points;
  std::vector<PointProvenance> provenance;
  RunSelector selector;
};

// BMU node of every time step, [member][t]. With a non-empty `members`
// subset only those rows are filled; the others stay empty.
std::vector<std::vector<int>> bmu_table(EnsembleDataset const& dataset, SomGrid const& grid,
                                        std::span<std::size_t const> members = {});

// The dataset must be normalized like the training samples.
RunDistribution project_runs(EnsembleDataset const& dataset, RunSelector selector,
                             SomGrid const& grid, std::span<Vec2 const> positions);

// Same, from a precomputed bmu_table.
RunDistribution project_runs(EnsembleDataset const& dataset, RunSelector selector,
                             std::vector<std::vector<int>> const& bmus,
                             std::span<Vec2 const> positions);

struct KdeParams {
  int grid_res = 128;
  std::optional<Vec2> bandwidth;  // (h_x, h_y)
  std::optional<Box> box;         // defaults to the points' box padded by 3h
};

struct Contour {
  double mass = 0.0;       // target probability mass
  double threshold = 0.0;  // density level
  double area = 0.0;       // area of {density >= threshold}
  std::vector<Ring> rings; // closed iso-lines, combined even-odd

  bool contains(Vec2 p) const;
};

inline constexpr std::array<double, 3> kContourMasses{0.25, 0.5, 0.75};

struct KdeResult {
  Box box;
  int grid_res = 0;
  Vec2 bandwidth;
  // Row-major [iy][ix], evaluated at cell centres; integrates to 1 over box.
  std::vector<double> density;
  std::array<Contour, 3> contours;

  double cell_width() const { return box.width() / grid_res; }
  double cell_height() const { return box.height() / grid_res; }
  Vec2 cell_center(int ix, int iy) const {
    return {box.xmin + (ix + 0.5) * cell_width(), box.ymin + (iy + 0.5) * cell_height()};
  }
};

// Per-axis Scott's rule, sigma floored at 1e-6 of the points' box diagonal.
Vec2 scott_bandwidth(std::span<Vec2 const> points);

// Bounding box padded by 3h on each side.
Box kde_box(std::span<Vec2 const> points, Vec2 bandwidth);

// Throws kInvalidArgument "degenerate distribution" for fewer than two
// distinct points.
KdeResult kde(std::span<Vec2 const> points, KdeParams const& params = {});

struct AnnotationShare {
  int id = 0;
  std::string label;
  std::size_t count = 0;
  double fraction = 0.0;
};

struct AnnotationBreakdown {
  std::vector<AnnotationShare> annotations;
  std::size_t total = 0;
  std::size_t unannotated_count = 0;
  double unannotated = 1.0;
};

AnnotationBreakdown annotation_breakdown(std::span<Vec2 const> points,
                                         std::span<Annotation const> annotations);

}  // namespace climsom
