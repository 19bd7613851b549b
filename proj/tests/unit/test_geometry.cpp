#include <doctest.h>

#include <random>

#include "climsom/geometry.hpp"
#include "oracles.hpp"

using namespace climsom;

TEST_CASE("point_in_ring agrees with ray casting on random points") {
  Ring const star{{0, 3}, {1, 1}, {3, 0}, {1, -1}, {0, -3}, {-1, -1}, {-3, 0}, {-1, 1}};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int i = 0; i < 5000; ++i) {
    Vec2 const p{u(rng), u(rng)};
    CHECK(point_in_ring(p, star) == oracle::inside_ring(p, star));
  }
}

TEST_CASE("boundary points count as inside") {
  Ring const sq{{0, 0}, {2, 0}, {2, 2}, {0, 2}, {0, 0}};
  CHECK(point_in_ring({1, 0}, sq));
  CHECK(point_in_ring({2, 2}, sq));
  CHECK(point_in_ring({0, 1.5}, sq));
  CHECK_FALSE(point_in_ring({2.0001, 1}, sq));
}

TEST_CASE("polygon holes use even-odd") {
  Polygon poly{{Ring{{0, 0}, {4, 0}, {4, 4}, {0, 4}}, Ring{{1, 1}, {3, 1}, {3, 3}, {1, 3}}}};
  CHECK(point_in_polygon({0.5, 0.5}, poly));
  CHECK_FALSE(point_in_polygon({2, 2}, poly));
  MultiPolygon mp{poly, Polygon{{Ring{{10, 10}, {11, 10}, {11, 11}}}}};
  CHECK(point_in_multipolygon({10.8, 10.2}, mp));
  CHECK_FALSE(point_in_multipolygon({5, 5}, mp));
}

TEST_CASE("signed area and orientation") {
  Ring ccw{{0, 0}, {3, 0}, {3, 2}, {0, 2}};
  CHECK(signed_area(ccw) == doctest::Approx(6));
  Ring cw(ccw.rbegin(), ccw.rend());
  CHECK(signed_area(cw) == doctest::Approx(-6));
  Ring closed = ccw;
  closed.push_back(ccw.front());
  CHECK(signed_area(closed) == doctest::Approx(6));
  CHECK(open_ring(closed).size() == 4);
}

TEST_CASE("simple rings") {
  CHECK(is_simple_ring(Ring{{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  CHECK_FALSE(is_simple_ring(Ring{{0, 0}, {1, 1}, {1, 0}, {0, 1}}));  // bowtie
}

TEST_CASE("convex hull contains every input point and is ccw") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<Vec2> pts(200);
  for (auto& p : pts) p = {g(rng), g(rng)};
  auto const hull = convex_hull(pts);
  CHECK(hull.size() >= 3);
  CHECK(signed_area(hull) > 0);
  for (auto p : pts) CHECK(oracle::inside_ring(p, hull));
  for (std::size_t i = 0; i < hull.size(); ++i) {
    auto const a = hull[i], b = hull[(i + 1) % hull.size()], c = hull[(i + 2) % hull.size()];
    CHECK(cross(b - a, c - b) > 0);
  }
}

TEST_CASE("hull drops collinear points and handles degenerate input") {
  auto const h = convex_hull({{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}});
  CHECK(h.size() == 4);
  CHECK(convex_hull({{1, 1}, {1, 1}}).size() == 1);
  CHECK(convex_hull({{0, 0}, {1, 1}, {2, 2}}).size() == 2);
}

TEST_CASE("boxes") {
  std::vector<Vec2> pts{{1, 5}, {-2, 3}, {0, 7}};
  Box const b = bounding_box(pts);
  CHECK(b == Box{-2, 3, 1, 7});
  CHECK(box_union(b, Box{0, 0, 4, 4}) == Box{-2, 0, 4, 7});
  CHECK(b.contains({1, 7}));
  CHECK(on_segment({1, 1}, {0, 0}, {2, 2}));
  CHECK_FALSE(on_segment({1, 1.1}, {0, 0}, {2, 2}));
}
