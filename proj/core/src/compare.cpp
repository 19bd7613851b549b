#include "climsom/compare.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include "climsom/error.hpp"
#include "climsom/transport.hpp"
#include "parallel.hpp"

namespace climsom {

std::size_t VectorField::supported_cells() const {
  return static_cast<std::size_t>(std::count(support.begin(), support.end(), 1));
}

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r) {
  // splitmix64 over the pair.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (r + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

void check_inputs(std::span<Vec2 const> r1, std::span<Vec2 const> r2, FieldParams const& p) {
  if (r1.size() < 2 || r2.size() < 2) invalid("degenerate distribution");
  if (p.k < 1) invalid("k must be >= 1");
  if (p.n < 1 || p.n > 1024) invalid("n must be in [1, 1024]");
}

struct Replicate {
  std::vector<Vec2> a;
  std::vector<Vec2> b;
  TransportPlan plan;
};

Replicate run_replicate(std::span<Vec2 const> r1, std::span<Vec2 const> r2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Replicate rep;
  std::uniform_int_distribution<std::size_t> pick1(0, r1.size() - 1);
  std::uniform_int_distribution<std::size_t> pick2(0, r2.size() - 1);
  rep.a.reserve(r1.size());
  rep.b.reserve(r2.size());
  for (std::size_t i = 0; i < r1.size(); ++i) rep.a.push_back(r1[pick1(rng)]);
  for (std::size_t i = 0; i < r2.size(); ++i) rep.b.push_back(r2[pick2(rng)]);
  rep.plan = optimal_transport(rep.a, rep.b);
  return rep;
}

}  // namespace

VectorField bootstrap_vector_field(std::span<Vec2 const> r1, std::span<Vec2 const> r2,
                                   FieldParams const& params) {
  check_inputs(r1, r2, params);
  VectorField field;
  field.n = params.n;
  field.box = params.box ? *params.box : box_union(bounding_box(r1), bounding_box(r2));
  if (!(field.box.diagonal() > 0)) invalid("degenerate distribution");
  auto const cells = static_cast<std::size_t>(params.n) * params.n;
  double const radius = 2.0 * std::max(field.cell_width(), field.cell_height());

  std::vector<std::vector<Vec2>> sums(params.k, std::vector<Vec2>(cells));
  std::vector<std::vector<std::uint8_t>> hits(params.k, std::vector<std::uint8_t>(cells, 0));
  detail::parallel_for(
      static_cast<std::size_t>(params.k),
      [&](std::size_t r) {
        auto const rep = run_replicate(r1, r2, replicate_seed(params.seed, r));
        // Mean displacement per distinct source location.
        std::map<Vec2, std::pair<Vec2, double>> by_source;
        for (auto const& pair : rep.plan.pairs) {
          auto const src = rep.a[pair.source];
          auto& [acc, mass] = by_source[src];
          acc = acc + pair.mass * (rep.b[pair.target] - src);
          mass += pair.mass;
        }
        std::vector<Vec2> locations;
        std::vector<Vec2> displacement;
        for (auto const& [loc, acc] : by_source) {
          locations.push_back(loc);
          displacement.push_back((1.0 / acc.second) * acc.first);
        }
        for (int iy = 0; iy < params.n; ++iy) {
          for (int ix = 0; ix < params.n; ++ix) {
            auto const c = field.cell_center(ix, iy);
            Vec2 exact_sum;
            int exact = 0;
            Vec2 weighted;
            double weights = 0.0;
            for (std::size_t s = 0; s < locations.size(); ++s) {
              double const d = distance(c, locations[s]);
              if (d > radius) continue;
              if (d < 1e-12) {
                exact_sum = exact_sum + displacement[s];
                ++exact;
              } else {
                double const w = 1.0 / (d * d);
                weighted = weighted + w * displacement[s];
                weights += w;
              }
            }
            auto const cell = static_cast<std::size_t>(iy) * params.n + ix;
            if (exact > 0) {
              sums[r][cell] = (1.0 / exact) * exact_sum;
              hits[r][cell] = 1;
            } else if (weights > 0) {
              sums[r][cell] = (1.0 / weights) * weighted;
              hits[r][cell] = 1;
            }
          }
        }
      },
      params.threads);

  field.vectors.assign(cells, {});
  field.support.assign(cells, 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    Vec2 acc;
    int count = 0;
    for (int r = 0; r < params.k; ++r) {
      if (hits[r][cell]) {
        acc = acc + sums[r][cell];
        ++count;
      }
    }
    if (count > 0) {
      field.vectors[cell] = (1.0 / count) * acc;
      field.support[cell] = 1;
    }
  }
  return field;
}

namespace {

std::vector<Annotation> ordered_annotations(std::span<Annotation const> annotations) {
  std::vector<Annotation> out(annotations.begin(), annotations.end());
  std::stable_sort(out.begin(), out.end(), [](Annotation const& a, Annotation const& b) {
    return std::tie(a.created_order, a.id) < std::tie(b.created_order, b.id);
  });
  return out;
}

}  // namespace

std::size_t region_of(Vec2 p, std::span<Annotation const> ordered) {
  for (std::size_t a = 0; a < ordered.size(); ++a) {
    if (point_in_ring(p, ordered[a].polygon)) return a;
  }
  return ordered.size();
}

TransitionMatrix transition_matrix(std::span<Vec2 const> r1, std::span<Vec2 const> r2,
                                   std::span<Annotation const> annotations,
                                   FieldParams const& params) {
  check_inputs(r1, r2, params);
  auto const ordered = ordered_annotations(annotations);
  auto const regions = ordered.size() + 1;

  TransitionMatrix out;
  for (auto const& a : ordered) {
    out.region_ids.push_back(a.id);
    out.regions.push_back(a.label);
  }
  out.region_ids.push_back(-1);
  out.regions.emplace_back("unannotated");

  std::vector<std::vector<double>> per_rep(params.k, std::vector<double>(regions * regions, 0.0));
  detail::parallel_for(
      static_cast<std::size_t>(params.k),
      [&](std::size_t r) {
        auto const rep = run_replicate(r1, r2, replicate_seed(params.seed, r));
        std::vector<std::size_t> ra(rep.a.size()), rb(rep.b.size());
        for (std::size_t i = 0; i < rep.a.size(); ++i) ra[i] = region_of(rep.a[i], ordered);
        for (std::size_t i = 0; i < rep.b.size(); ++i) rb[i] = region_of(rep.b[i], ordered);
        for (auto const& pair : rep.plan.pairs) {
          per_rep[r][ra[pair.source] * regions + rb[pair.target]] += pair.mass;
        }
      },
      params.threads);

  out.flows.assign(regions, std::vector<double>(regions, 0.0));
  double total = 0.0;
  for (std::size_t s = 0; s < regions; ++s) {
    for (std::size_t t = 0; t < regions; ++t) {
      for (int r = 0; r < params.k; ++r) out.flows[s][t] += per_rep[r][s * regions + t];
      total += out.flows[s][t];
    }
  }
  out.source_totals.assign(regions, 0.0);
  for (std::size_t s = 0; s < regions; ++s) {
    for (std::size_t t = 0; t < regions; ++t) {
      out.flows[s][t] /= total;
      out.source_totals[s] += out.flows[s][t];
    }
  }
  return out;
}

std::pair<KdeResult, KdeResult> side_by_side(std::span<Vec2 const> r1, std::span<Vec2 const> r2,
                                             KdeParams const& params) {
  KdeParams p1 = params;
  KdeParams p2 = params;
  if (!p1.bandwidth) p1.bandwidth = scott_bandwidth(r1);
  if (!p2.bandwidth) p2.bandwidth = scott_bandwidth(r2);
  if (!params.box) {
    auto const shared = box_union(kde_box(r1, *p1.bandwidth), kde_box(r2, *p2.bandwidth));
    p1.box = shared;
    p2.box = shared;
  }
  return {kde(r1, p1), kde(r2, p2)};
}

}  // namespace climsom
