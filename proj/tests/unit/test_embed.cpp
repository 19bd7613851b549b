#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "climsom/embed.hpp"
#include "climsom/error.hpp"
#include "fixtures.hpp"

using namespace climsom;

namespace {

double target_of(NodeGraph const& g, int a, int b) {
  for (auto const& e : g.edges) {
    if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return e.target;
  }
  return -1;
}

NodeGraph chain(std::vector<double> targets) {
  NodeGraph g;
  g.rows = 1;
  g.cols = static_cast<int>(targets.size()) + 1;
  for (int i = 0; i < static_cast<int>(targets.size()); ++i) g.edges.push_back({i, i + 1, targets[i]});
  return g;
}

bool monotone(std::vector<double> const& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i] > trace[i - 1]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("node graph of a lattice") {
  auto const g = build_node_graph(fixture::random_grid(3, 3, 4, 1));
  CHECK(g.edges.size() == 12);
  CHECK(g.num_nodes() == 9);
  auto const g2 = build_node_graph(fixture::random_grid(4, 7, 2, 1));
  CHECK(g2.edges.size() == std::size_t(4 * 6 + 3 * 7));
}

TEST_CASE("edge targets are divided by the median") {
  auto const g = build_node_graph(fixture::grid_of(2, 2, 1, {0, 1, 2, 3}));
  CHECK(target_of(g, 0, 1) == doctest::Approx(2.0 / 3));
  CHECK(target_of(g, 2, 3) == doctest::Approx(2.0 / 3));
  CHECK(target_of(g, 0, 2) == doctest::Approx(4.0 / 3));
  CHECK(target_of(g, 1, 3) == doctest::Approx(4.0 / 3));
  CHECK(target_of(g, 0, 3) == -1);
}

TEST_CASE("lattice layout is centred with unit rms radius") {
  auto const p = lattice_layout(3, 5);
  REQUIRE(p.size() == 15);
  Vec2 c{};
  double r2 = 0;
  for (auto q : p) {
    c = c + q;
    r2 += dot(q, q);
  }
  CHECK(c.x == doctest::Approx(0).epsilon(1e-12));
  CHECK(c.y == doctest::Approx(0).epsilon(1e-12));
  CHECK(std::sqrt(r2 / 15) == doctest::Approx(1));
  CHECK(p[1].x > p[0].x);
  CHECK(p[5].y > p[0].y);
}

TEST_CASE("distortion hand value") {
  auto const g = chain({1, 2});
  std::vector<Vec2> x{{0, 0}, {2, 0}, {2, 1}};
  CHECK(distortion(g, x) == doctest::Approx(1 + 1));
}

TEST_CASE("a chain is embedded with its exact edge lengths") {
  auto const g = chain({1, 0.5, 2, 1.5});
  auto const e = mde_project(g, {});
  CHECK(e.status == MdeStatus::kConverged);
  CHECK(distortion(g, e.positions) < 1e-6);
  CHECK(monotone(e.objective_trace));
  Vec2 c{};
  for (auto p : e.positions) c = c + p;
  CHECK(norm(c) < 1e-9);
}

TEST_CASE("objective never increases on a free lattice and with anchors") {
  auto const g = build_node_graph(fixture::random_grid(8, 8, 5, 2));
  auto const free = mde_project(g, {});
  CHECK(monotone(free.objective_trace));
  CHECK(free.objective_trace.back() < free.objective_trace.front());
  auto const anchored = mde_project(g, {{0, {-3, -3}}, {63, {3, 3}}});
  CHECK(monotone(anchored.objective_trace));
  CHECK(anchored.positions[0] == Vec2{-3, -3});
  CHECK(anchored.positions[63] == Vec2{3, 3});
}

TEST_CASE("all nodes anchored returns the anchors") {
  auto const g = build_node_graph(fixture::random_grid(3, 3, 2, 3));
  AnchorMap anchors;
  for (int k = 0; k < 9; ++k) anchors[k] = {double(k % 3) * 2, double(k / 3) * 2};
  auto const e = mde_project(g, anchors);
  CHECK(e.status == MdeStatus::kConverged);
  for (int k = 0; k < 9; ++k) CHECK(e.positions[k] == anchors[k]);

  AnchorMap collapsed;
  for (int k = 0; k < 9; ++k) collapsed[k] = {1, 1};
  CHECK(mde_project(g, collapsed).status == MdeStatus::kStalled);
}

TEST_CASE("a small anchor perturbation moves free nodes by O(eps)") {
  MdeConfig cfg;
  cfg.tolerance = 1e-14;
  cfg.max_iterations = 200000;
  auto const g = build_node_graph(fixture::random_grid(3, 3, 3, 4));
  auto const base = mde_project(g, {{0, {-1, -1}}, {8, {1, 1}}}, std::nullopt, cfg);
  for (double eps : {1e-2, 1e-3}) {
    auto const moved = update_anchor(base, 8, Vec2{1 + eps, 1});
    double worst = 0;
    for (int k = 1; k < 8; ++k) {
      worst = std::max(worst, distance(base.positions[k], moved.positions[k]));
    }
    CHECK(worst <= 10 * eps);
    CHECK(moved.positions[0] == Vec2{-1, -1});
  }
}

TEST_CASE("dragging a corner pulls its neighbours along") {
  auto const g = build_node_graph(fixture::random_grid(5, 5, 3, 6));
  auto const e = mde_project(g, {});
  Vec2 const target = e.positions[0] + Vec2{-4, -4};
  auto const d = update_anchor(e, 0, target);
  CHECK(d.positions[0] == target);
  CHECK(d.anchors.size() == 1);
  for (int k : {1, 5}) {
    CHECK(dot(d.positions[k] - e.positions[k], Vec2{-1, -1}) > 0);
  }
  auto const released = update_anchor(d, 0, std::nullopt);
  CHECK(released.anchors.empty());
  CHECK_THROWS_AS(update_anchor(e, 25, Vec2{}), Error);
}

TEST_CASE("malformed graphs are rejected") {
  NodeGraph g;
  g.rows = 1;
  g.cols = 3;
  g.edges = {{0, 1, 1}};
  CHECK_FALSE(is_connected(g));
  CHECK_THROWS_AS(mde_project(g, {}), Error);
  CHECK_THROWS_AS(mde_project(chain({1}), {{5, {0, 0}}}), Error);
  CHECK_THROWS_AS(mde_project(chain({1}), {}, std::vector<Vec2>(3)), Error);
}

TEST_CASE("cancellation") {
  std::stop_source src;
  src.request_stop();
  auto const g = build_node_graph(fixture::random_grid(4, 4, 3, 1));
  CHECK(mde_project(g, {}, std::nullopt, {}, src.get_token()).status == MdeStatus::kCancelled);
  CHECK(std::string(to_string(MdeStatus::kStalled)) == "stalled");
}
