#include "climsom/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "climsom/error.hpp"
#include "climsom/transport.hpp"
#include "parallel.hpp"

namespace climsom {

std::vector<std::vector<int>> bmu_table(EnsembleDataset const& dataset, SomGrid const& grid,
                                        std::span<std::size_t const> members) {
  if (!dataset.normalized) invalid("dataset must be normalized before projection");
  if (dataset.num_cells() != grid.dim()) invalid("dataset does not match the SOM dimension");
  std::vector<std::size_t> wanted(members.begin(), members.end());
  if (wanted.empty()) {
    wanted.resize(dataset.members.size());
    std::iota(wanted.begin(), wanted.end(), 0);
  }
  std::sort(wanted.begin(), wanted.end());
  wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
  auto const steps = dataset.time_len();
  std::vector<std::vector<int>> out(dataset.members.size());
  for (auto m : wanted) {
    if (m >= out.size()) invalid("member index out of range");
    out[m].assign(steps, 0);
  }
  detail::parallel_for(wanted.size() * steps, [&](std::size_t i) {
    auto const m = wanted[i / steps];
    auto const t = i % steps;
    out[m][t] = static_cast<int>(bmu(grid, dataset.step(m, t)).best);
  });
  return out;
}

RunDistribution project_runs(EnsembleDataset const& dataset, RunSelector selector,
                             std::vector<std::vector<int>> const& bmus,
                             std::span<Vec2 const> positions) {
  if (selector.members.empty()) invalid("empty selection");
  auto const years = dataset.time.years();
  RunDistribution out;
  for (auto const& key : selector.members) {
    auto const m = dataset.member_index(key);
    for (std::size_t t = 0; t < dataset.time_len(); ++t) {
      if (!selector.months.contains(dataset.time.months[t])) continue;
      auto const node = static_cast<std::size_t>(bmus.at(m).at(t));
      if (node >= positions.size()) invalid("embedding does not match the SOM");
      out.points.push_back(positions[node]);
      out.provenance.push_back({static_cast<int>(m), years[t], dataset.time.months[t]});
    }
  }
  if (out.points.empty()) invalid("empty selection");
  out.selector = std::move(selector);
  return out;
}

RunDistribution project_runs(EnsembleDataset const& dataset, RunSelector selector,
                             SomGrid const& grid, std::span<Vec2 const> positions) {
  if (positions.size() != grid.num_nodes()) invalid("embedding does not match the SOM");
  if (selector.members.empty()) invalid("empty selection");
  std::vector<std::size_t> wanted;
  for (auto const& key : selector.members) wanted.push_back(dataset.member_index(key));
  auto const bmus = bmu_table(dataset, grid, wanted);
  return project_runs(dataset, std::move(selector), bmus, positions);
}

bool Contour::contains(Vec2 p) const {
  bool inside = false;
  for (auto const& ring : rings) {
    if (point_in_ring(p, ring)) inside = !inside;
  }
  return inside;
}

Vec2 scott_bandwidth(std::span<Vec2 const> points) {
  auto const n = points.size();
  if (n < 2) invalid("degenerate distribution");
  double mx = 0, my = 0;
  for (auto p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0;
  for (auto p : points) {
    vx += (p.x - mx) * (p.x - mx);
    vy += (p.y - my) * (p.y - my);
  }
  double const floor = 1e-6 * bounding_box(points).diagonal();
  double const factor = std::pow(static_cast<double>(n), -1.0 / 6.0);
  return {std::max(std::sqrt(vx / (n - 1)), floor) * factor,
          std::max(std::sqrt(vy / (n - 1)), floor) * factor};
}

Box kde_box(std::span<Vec2 const> points, Vec2 h) {
  auto b = bounding_box(points);
  return {b.xmin - 3 * h.x, b.ymin - 3 * h.y, b.xmax + 3 * h.x, b.ymax + 3 * h.y};
}

namespace {

struct Grid {
  int g;
  std::vector<double> const& density;
  Box box;

  // Node values of the grid padded with a zero border.
  double at(int i, int j) const {
    if (i < 1 || j < 1 || i > g || j > g) return 0.0;
    return density[static_cast<std::size_t>(j - 1) * g + (i - 1)];
  }
  Vec2 node(int i, int j) const {
    return {box.xmin + (i - 0.5) * box.width() / g, box.ymin + (j - 0.5) * box.height() / g};
  }
};

std::vector<Ring> march(Grid const& grid, double tau) {
  int const w = grid.g + 2;
  // Edge ids: 2*(j*w+i) is the edge (i,j)-(i+1,j); +1 is (i,j)-(i,j+1).
  auto crossing = [&](std::int64_t id) {
    auto const base = id / 2;
    int const i = static_cast<int>(base % w);
    int const j = static_cast<int>(base / w);
    int const i2 = (id % 2 == 0) ? i + 1 : i;
    int const j2 = (id % 2 == 0) ? j : j + 1;
    double const va = grid.at(i, j);
    double const vb = grid.at(i2, j2);
    double const t = (tau - va) / (vb - va);
    auto const a = grid.node(i, j);
    auto const b = grid.node(i2, j2);
    return a + t * (b - a);
  };

  std::vector<std::pair<std::int64_t, std::int64_t>> segments;
  for (int j = 0; j + 1 < w; ++j) {
    for (int i = 0; i + 1 < w; ++i) {
      double const v0 = grid.at(i, j), v1 = grid.at(i + 1, j);
      double const v2 = grid.at(i + 1, j + 1), v3 = grid.at(i, j + 1);
      int const c = (v0 >= tau) | (v1 >= tau) << 1 | (v2 >= tau) << 2 | (v3 >= tau) << 3;
      if (c == 0 || c == 15) continue;
      std::int64_t const e0 = 2 * (static_cast<std::int64_t>(j) * w + i);
      std::int64_t const e1 = 2 * (static_cast<std::int64_t>(j) * w + i + 1) + 1;
      std::int64_t const e2 = 2 * (static_cast<std::int64_t>(j + 1) * w + i);
      std::int64_t const e3 = 2 * (static_cast<std::int64_t>(j) * w + i) + 1;
      bool const centre = (v0 + v1 + v2 + v3) / 4 >= tau;
      switch (c) {
        case 1: case 14: segments.emplace_back(e3, e0); break;
        case 2: case 13: segments.emplace_back(e0, e1); break;
        case 3: case 12: segments.emplace_back(e3, e1); break;
        case 4: case 11: segments.emplace_back(e1, e2); break;
        case 6: case 9: segments.emplace_back(e0, e2); break;
        case 7: case 8: segments.emplace_back(e3, e2); break;
        case 5:
          if (centre) {
            segments.emplace_back(e0, e1);
            segments.emplace_back(e2, e3);
          } else {
            segments.emplace_back(e3, e0);
            segments.emplace_back(e1, e2);
          }
          break;
        case 10:
          if (centre) {
            segments.emplace_back(e3, e0);
            segments.emplace_back(e1, e2);
          } else {
            segments.emplace_back(e0, e1);
            segments.emplace_back(e2, e3);
          }
          break;
        default: break;
      }
    }
  }

  std::unordered_map<std::int64_t, std::vector<std::size_t>> by_edge;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    by_edge[segments[s].first].push_back(s);
    by_edge[segments[s].second].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<Ring> rings;
  for (std::size_t start = 0; start < segments.size(); ++start) {
    if (used[start]) continue;
    used[start] = true;
    Ring ring{crossing(segments[start].first)};
    auto const first = segments[start].first;
    auto edge = segments[start].second;
    while (edge != first) {
      ring.push_back(crossing(edge));
      std::size_t next = segments.size();
      for (auto s : by_edge[edge]) {
        if (!used[s]) {
          next = s;
          break;
        }
      }
      if (next == segments.size()) break;  // open chain; cannot happen with a zero border
      used[next] = true;
      edge = segments[next].first == edge ? segments[next].second : segments[next].first;
    }
    if (ring.size() >= 3) rings.push_back(std::move(ring));
  }
  return rings;
}

double region_area(std::vector<Ring> const& rings) {
  double area = 0.0;
  for (std::size_t r = 0; r < rings.size(); ++r) {
    int depth = 0;
    for (std::size_t s = 0; s < rings.size(); ++s) {
      if (s != r && point_in_ring(rings[r][0], rings[s])) ++depth;
    }
    double const a = std::abs(signed_area(rings[r]));
    area += depth % 2 == 0 ? a : -a;
  }
  return area;
}

}  // namespace

KdeResult kde(std::span<Vec2 const> points, KdeParams const& params) {
  auto const agg = aggregate_points(points);
  if (agg.points.size() < 2) invalid("degenerate distribution");
  if (params.grid_res < 2 || params.grid_res > 4096) invalid("grid_res must be in [2, 4096]");

  KdeResult out;
  out.grid_res = params.grid_res;
  if (params.bandwidth) {
    auto const h = *params.bandwidth;
    if (!(h.x > 0) || !(h.y > 0) || !std::isfinite(h.x) || !std::isfinite(h.y)) {
      invalid("bandwidth must be positive");
    }
    out.bandwidth = h;
  } else {
    out.bandwidth = scott_bandwidth(points);
  }
  out.box = params.box ? *params.box : kde_box(points, out.bandwidth);
  if (!(out.box.width() > 0) || !(out.box.height() > 0)) invalid("KDE box must have positive area");

  int const g = out.grid_res;
  auto const h = out.bandwidth;
  out.density.assign(static_cast<std::size_t>(g) * g, 0.0);
  std::vector<double> kx(g), ky(g);
  double const norm = 1.0 / (2 * std::numbers::pi * h.x * h.y * static_cast<double>(points.size()));
  for (std::size_t u = 0; u < agg.points.size(); ++u) {
    auto const p = agg.points[u];
    for (int i = 0; i < g; ++i) {
      auto const c = out.cell_center(i, i);
      double const dx = (c.x - p.x) / h.x;
      double const dy = (c.y - p.y) / h.y;
      kx[i] = std::exp(-0.5 * dx * dx);
      ky[i] = std::exp(-0.5 * dy * dy);
    }
    double const w = norm * static_cast<double>(agg.counts[u]);
    for (int j = 0; j < g; ++j) {
      double const wy = w * ky[j];
      if (wy == 0.0) continue;
      auto* row = out.density.data() + static_cast<std::size_t>(j) * g;
      for (int i = 0; i < g; ++i) row[i] += wy * kx[i];
    }
  }

  // Renormalize so the midpoint rule integrates to exactly 1 over the box.
  double const cell_area = out.cell_width() * out.cell_height();
  double total = 0.0;
  for (double d : out.density) total += d;
  total *= cell_area;
  if (!(total > 0)) invalid("distribution has no mass inside the KDE box");
  for (double& d : out.density) d /= total;

  std::vector<double> sorted = out.density;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  Grid const grid{g, out.density, out.box};
  for (std::size_t c = 0; c < kContourMasses.size(); ++c) {
    double const q = kContourMasses[c];
    double acc = 0.0;
    double tau = sorted.back();
    for (double d : sorted) {
      acc += d * cell_area;
      if (acc >= q) {
        tau = d;
        break;
      }
    }
    auto& contour = out.contours[c];
    contour.mass = q;
    contour.threshold = tau;
    contour.rings = march(grid, tau);
    contour.area = region_area(contour.rings);
  }
  return out;
}

AnnotationBreakdown annotation_breakdown(std::span<Vec2 const> points,
                                         std::span<Annotation const> annotations) {
  AnnotationBreakdown out;
  out.total = points.size();
  for (auto const& a : annotations) out.annotations.push_back({a.id, a.label, 0, 0.0});
  for (auto p : points) {
    bool any = false;
    for (std::size_t a = 0; a < annotations.size(); ++a) {
      if (point_in_ring(p, annotations[a].polygon)) {
        ++out.annotations[a].count;
        any = true;
      }
    }
    if (!any) ++out.unannotated_count;
  }
  if (out.total > 0) {
    for (auto& s : out.annotations) s.fraction = static_cast<double>(s.count) / out.total;
    out.unannotated = static_cast<double>(out.unannotated_count) / out.total;
  }
  return out;
}

}  // namespace climsom
