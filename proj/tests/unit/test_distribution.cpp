#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "climsom/distribution.hpp"
#include "climsom/embed.hpp"
#include "climsom/error.hpp"
#include "climsom/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace climsom;

namespace {

std::vector<Vec2> gaussian(std::size_t n, std::uint64_t seed, Vec2 centre = {}, double sd = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, sd);
  std::vector<Vec2> p(n);
  for (auto& q : p) q = centre + Vec2{g(rng), g(rng)};
  return p;
}

std::vector<Vec2> sorted(std::vector<Vec2> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct RunScene {
  EnsembleDataset data = normalize_per_month(generate_synthetic_ensemble(fixture::small_recipe(), 3));
  SomGrid grid;
  std::vector<Vec2> positions = lattice_layout(3, 3);

  RunScene() {
    // nodes equal the first nine steps of member 0
    std::vector<float> w;
    for (std::size_t t = 0; t < 9; ++t) {
      auto const s = data.step(0, t);
      w.insert(w.end(), s.begin(), s.end());
    }
    grid = fixture::grid_of(3, 3, data.num_cells(), std::move(w));
  }

  RunDistribution runs(std::vector<std::string> members, MonthFilter months) const {
    return project_runs(data, {std::move(members), months}, grid, positions);
  }
};

}  // namespace

TEST_CASE("steps equal to node weights land on their nodes") {
  RunScene s;
  auto const key = s.data.members[0].key();
  auto const d = s.runs({key}, MonthFilter::all());
  REQUIRE(d.points.size() == s.data.time_len());
  for (std::size_t t = 0; t < 9; ++t) {
    CHECK(d.points[t] == s.positions[t]);
    CHECK(d.provenance[t].month == s.data.time.months[t]);
    CHECK(d.provenance[t].member == 0);
  }
  for (auto p : d.points) {
    CHECK(std::find(s.positions.begin(), s.positions.end(), p) != s.positions.end());
  }
}

TEST_CASE("two members of eight steps give sixteen points") {
  RunScene s;
  auto const d = s.runs({s.data.members[0].key(), s.data.members[2].key()}, MonthFilter::parse("1-4"));
  CHECK(d.points.size() == 16);
  CHECK_THROWS_AS(s.runs({}, MonthFilter::all()), Error);
  CHECK_THROWS_AS(s.runs({"no:such:member"}, MonthFilter::all()), Error);
}

TEST_CASE("scrambling time order gives the same multiset") {
  RunScene s;
  auto scrambled = s.data;
  std::mt19937_64 rng(1);
  auto const cells = s.data.num_cells();
  std::vector<std::size_t> order(s.data.time_len());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t t = 0; t < order.size(); ++t) {
    auto const src = s.data.step(1, order[t]);
    std::copy(src.begin(), src.end(), scrambled.values[1].begin() + t * cells);
  }
  auto const key = s.data.members[1].key();
  auto const a = project_runs(s.data, {{key}, MonthFilter::all()}, s.grid, s.positions);
  auto const b = project_runs(scrambled, {{key}, MonthFilter::all()}, s.grid, s.positions);
  CHECK(sorted(a.points) == sorted(b.points));
}

TEST_CASE("pooling members is the union of their multisets") {
  RunScene s;
  auto const k0 = s.data.members[0].key(), k3 = s.data.members[3].key();
  auto pooled = s.runs({k0, k3}, MonthFilter::all()).points;
  auto a = s.runs({k0}, MonthFilter::all()).points;
  auto const b = s.runs({k3}, MonthFilter::all()).points;
  a.insert(a.end(), b.begin(), b.end());
  CHECK(sorted(pooled) == sorted(a));
  auto const bmus = bmu_table(s.data, s.grid);
  CHECK(project_runs(s.data, {{k0, k3}, MonthFilter::all()}, bmus, s.positions).points == pooled);
}

TEST_CASE("Scott bandwidth and padded box") {
  auto const p = gaussian(200, 1, {1, 2}, 0.5);
  double mx = 0, my = 0;
  for (auto q : p) {
    mx += q.x;
    my += q.y;
  }
  mx /= 200;
  my /= 200;
  double sx = 0, sy = 0;
  for (auto q : p) {
    sx += (q.x - mx) * (q.x - mx);
    sy += (q.y - my) * (q.y - my);
  }
  sx = std::sqrt(sx / 199);
  sy = std::sqrt(sy / 199);
  auto const h = scott_bandwidth(p);
  CHECK(h.x == doctest::Approx(sx * std::pow(200.0, -1.0 / 6)));
  CHECK(h.y == doctest::Approx(sy * std::pow(200.0, -1.0 / 6)));
  auto const box = kde_box(p, h);
  auto const raw = bounding_box(p);
  CHECK(box.xmin == doctest::Approx(raw.xmin - 3 * h.x));
  CHECK(box.ymax == doctest::Approx(raw.ymax + 3 * h.y));
}

TEST_CASE("density is non-negative and integrates to one") {
  auto const p = gaussian(300, 2);
  auto const r = kde(p);
  CHECK(r.grid_res == 128);
  double total = 0;
  for (double d : r.density) {
    CHECK(d >= 0);
    total += d;
  }
  CHECK(total * r.cell_width() * r.cell_height() == doctest::Approx(1).epsilon(1e-3));
}

TEST_CASE("density does not depend on point order") {
  auto p = gaussian(150, 3);
  auto const a = kde(p);
  std::reverse(p.begin(), p.end());
  auto const b = kde(p);
  REQUIRE(a.density.size() == b.density.size());
  for (std::size_t i = 0; i < a.density.size(); ++i) {
    CHECK(a.density[i] == doctest::Approx(b.density[i]).epsilon(1e-12));
  }
}

TEST_CASE("contour thresholds match the cell-mass oracle") {
  KdeParams params;
  params.grid_res = 48;
  auto const r = kde(gaussian(400, 4), params);
  double const area = r.cell_width() * r.cell_height();
  for (auto const& c : r.contours) {
    double at_least = 0, above = 0;
    for (double d : r.density) {
      if (d >= c.threshold) at_least += d * area;
      if (d > c.threshold) above += d * area;
    }
    CHECK(at_least >= c.mass - 1e-12);
    CHECK(above < c.mass + 1e-12);
  }
  CHECK(r.contours[0].threshold > r.contours[1].threshold);
  CHECK(r.contours[1].threshold > r.contours[2].threshold);
  CHECK(r.contours[0].area <= r.contours[1].area);
  CHECK(r.contours[1].area <= r.contours[2].area);
}

TEST_CASE("contour containment agrees with the density at cell centres") {
  KdeParams params;
  params.grid_res = 40;
  auto const r = kde(gaussian(300, 5), params);
  auto const& c = r.contours[1];
  int agree = 0, total = 0;
  for (int iy = 0; iy < r.grid_res; ++iy) {
    for (int ix = 0; ix < r.grid_res; ++ix) {
      double const d = r.density[static_cast<std::size_t>(iy) * r.grid_res + ix];
      if (std::abs(d - c.threshold) < 0.05 * c.threshold) continue;  // too close to the line
      ++total;
      agree += (d > c.threshold) == c.contains(r.cell_center(ix, iy));
    }
  }
  CHECK(agree == total);
}

TEST_CASE("two separated blobs give two inner components") {
  auto p = gaussian(200, 6, {-5, 0}, 0.5);
  auto const q = gaussian(200, 7, {5, 0}, 0.5);
  p.insert(p.end(), q.begin(), q.end());
  auto const r = kde(p);
  CHECK(r.contours[0].rings.size() >= 2);
  CHECK(r.contours[0].contains({-5, 0}));
  CHECK(r.contours[0].contains({5, 0}));
  CHECK_FALSE(r.contours[0].contains({0, 0}));
}

TEST_CASE("degenerate distributions are rejected") {
  std::vector<Vec2> same(10, Vec2{1, 1});
  try {
    kde(same);
    FAIL("expected an error");
  } catch (Error const& e) {
    CHECK(e.kind() == ErrorKind::kInvalidArgument);
    CHECK(std::string(e.what()).find("degenerate distribution") != std::string::npos);
  }
  CHECK_THROWS_AS(kde(std::vector<Vec2>{{0, 0}}), Error);
  CHECK_NOTHROW(kde(std::vector<Vec2>{{0, 0}, {1, 0}}));  // collinear still works
}

TEST_CASE("breakdown counting") {
  std::vector<Vec2> p{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  auto const a = make_annotation(1, "corner", Ring{{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}}, 0);
  auto const r = annotation_breakdown(p, std::vector{a});
  REQUIRE(r.annotations.size() == 1);
  CHECK(r.annotations[0].count == 1);
  CHECK(r.annotations[0].fraction == doctest::Approx(0.25));
  CHECK(r.unannotated == doctest::Approx(0.75));
  auto const all = make_annotation(2, "all", Ring{{0, 0}, {3, 0}, {3, 3}, {0, 3}}, 1);
  auto const r2 = annotation_breakdown(p, std::vector{all});
  CHECK(r2.annotations[0].fraction == 1);
  CHECK(r2.unannotated == 0);
  auto const none = annotation_breakdown(p, {});
  CHECK(none.unannotated == 1);
  CHECK(none.total == 4);
}

TEST_CASE("breakdown matches per-point brute force") {
  auto const p = gaussian(500, 8);
  std::vector<Annotation> anns{
      make_annotation(1, "a", Ring{{-1, -1}, {1, -1}, {0, 1.5}}, 0),
      make_annotation(2, "b", Ring{{0, 0}, {3, 0}, {3, 3}, {0, 3}}, 1),
      make_annotation(3, "c", Ring{{-3, -3}, {-1, -3}, {-1, 0}, {-2, -1}, {-3, 0}}, 2)};
  auto const r = annotation_breakdown(p, anns);
  std::size_t in_any = 0;
  for (auto q : p) {
    bool any = false;
    for (auto const& a : anns) any = any || oracle::inside_ring(q, a.polygon);
    in_any += any;
  }
  for (std::size_t i = 0; i < anns.size(); ++i) {
    std::size_t n = 0;
    for (auto q : p) n += oracle::inside_ring(q, anns[i].polygon);
    CHECK(r.annotations[i].count == n);
  }
  CHECK(r.unannotated_count == p.size() - in_any);
  CHECK(r.unannotated + double(in_any) / p.size() == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("disjoint annotation fractions sum to at most one") {
  auto const p = gaussian(300, 9);
  std::vector<Annotation> anns{make_annotation(1, "l", Ring{{-9, -9}, {0, -9}, {0, 9}, {-9, 9}}, 0),
                               make_annotation(2, "r", Ring{{0.01, -9}, {9, -9}, {9, 9}, {0.01, 9}}, 1)};
  auto const r = annotation_breakdown(p, anns);
  double const sum = r.annotations[0].fraction + r.annotations[1].fraction;
  CHECK(sum <= 1 + 1e-12);
  CHECK(sum + r.unannotated == doctest::Approx(1));
}
